//! Grayscale PFM ("Pf") reader/writer for depth maps and single-channel
//! float images. Writes little-endian (scale -1.0) with bottom-to-top rows
//! per the PFM convention; reads either endianness. Round trips are
//! bit-exact, including non-finite sentinels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{check_payload, IoError};
use crate::geometry::DepthMap;

struct Scanner<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> Scanner<R> {
    fn new(inner: R) -> Scanner<R> {
        Scanner { inner, offset: 0 }
    }

    fn byte(&mut self) -> Result<Option<u8>, std::io::Error> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(None),
            _ => {
                self.offset += 1;
                Ok(Some(b[0]))
            }
        }
    }

    /// Next whitespace-delimited token.
    fn token(&mut self, path: &Path) -> Result<String, IoError> {
        let mut tok = Vec::new();
        loop {
            match self.byte().map_err(|e| IoError::io(path, e))? {
                None => {
                    if tok.is_empty() {
                        return Err(IoError::format(path, self.offset, "unexpected end of header"));
                    }
                    break;
                }
                Some(b) if b.is_ascii_whitespace() => {
                    if !tok.is_empty() {
                        break;
                    }
                }
                Some(b) => tok.push(b),
            }
        }
        String::from_utf8(tok)
            .map_err(|_| IoError::format(path, self.offset, "non-ascii header token"))
    }

    fn exact(&mut self, buf: &mut [u8], path: &Path) -> Result<(), IoError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                IoError::format(
                    path,
                    self.offset,
                    format!("payload truncated, expected {} more bytes", buf.len()),
                )
            } else {
                IoError::io(path, e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }
}

/// Reads a grayscale PFM file.
pub fn read_pfm(path: &Path) -> Result<DepthMap, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut s = Scanner::new(BufReader::new(file));

    let magic = s.token(path)?;
    if magic != "Pf" {
        return Err(IoError::format(
            path,
            0,
            format!("bad magic {magic:?}, expected \"Pf\" (grayscale PFM)"),
        ));
    }
    let header_at = s.offset;
    let width: u32 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, header_at, "invalid width"))?;
    let height: u32 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, s.offset, "invalid height"))?;
    let scale: f64 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, s.offset, "invalid scale"))?;
    if scale == 0.0 {
        return Err(IoError::format(path, s.offset, "scale must be non-zero"));
    }
    let little_endian = scale < 0.0;

    let count = width as u64 * height as u64;
    check_payload(path, count.saturating_mul(4))?;
    let mut payload = vec![0u8; count as usize * 4];
    s.exact(&mut payload, path)?;

    // PFM stores the bottom row first.
    let mut data = vec![0.0f32; count as usize];
    for y in 0..height as usize {
        let src_row = height as usize - 1 - y;
        for x in 0..width as usize {
            let i = (src_row * width as usize + x) * 4;
            let bytes = [payload[i], payload[i + 1], payload[i + 2], payload[i + 3]];
            data[y * width as usize + x] = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
        }
    }
    Ok(DepthMap::from_data(width, height, data))
}

/// Writes a grayscale little-endian PFM file.
pub fn write_pfm(path: &Path, map: &DepthMap) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |buf: &[u8]| w.write_all(buf).map_err(|e| IoError::io(path, e));
    emit(format!("Pf\n{} {}\n-1.0\n", map.width(), map.height()).as_bytes())?;
    for y in (0..map.height()).rev() {
        for x in 0..map.width() {
            let b = map.get(x, y).to_le_bytes();
            w.write_all(&b).map_err(|e| IoError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| IoError::io(path, e))
}
