//! Binary PPM (P6, maxval 255) reader/writer. Values are stored as-is:
//! linear [0,1] maps to round(v*255) with no transfer function. Header
//! comments (`#` to end of line) are tolerated on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{check_payload, IoError};
use crate::image::FeatureImage;

struct Scanner<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> Scanner<R> {
    fn byte(&mut self, path: &Path) -> Result<Option<u8>, IoError> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b).map_err(|e| IoError::io(path, e))? {
            0 => Ok(None),
            _ => {
                self.offset += 1;
                Ok(Some(b[0]))
            }
        }
    }

    /// Next token, skipping whitespace and `#` comments.
    fn token(&mut self, path: &Path) -> Result<String, IoError> {
        let mut tok = Vec::new();
        let mut in_comment = false;
        loop {
            match self.byte(path)? {
                None => {
                    if tok.is_empty() {
                        return Err(IoError::format(path, self.offset, "unexpected end of header"));
                    }
                    break;
                }
                Some(b) => {
                    if in_comment {
                        if b == b'\n' {
                            in_comment = false;
                        }
                        continue;
                    }
                    if b == b'#' && tok.is_empty() {
                        in_comment = true;
                        continue;
                    }
                    if b.is_ascii_whitespace() {
                        if !tok.is_empty() {
                            break;
                        }
                        continue;
                    }
                    tok.push(b);
                }
            }
        }
        String::from_utf8(tok)
            .map_err(|_| IoError::format(path, self.offset, "non-ascii header token"))
    }
}

/// Reads a binary P6 image into a 3-channel float image in [0,1].
pub fn read_ppm(path: &Path) -> Result<FeatureImage, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut s = Scanner {
        inner: BufReader::new(file),
        offset: 0,
    };
    let magic = s.token(path)?;
    if magic != "P6" {
        return Err(IoError::format(
            path,
            0,
            format!("bad magic {magic:?}, expected \"P6\""),
        ));
    }
    let width: u32 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, s.offset, "invalid width"))?;
    let height: u32 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, s.offset, "invalid height"))?;
    let maxval: u32 = s
        .token(path)?
        .parse()
        .map_err(|_| IoError::format(path, s.offset, "invalid maxval"))?;
    if maxval != 255 {
        return Err(IoError::format(
            path,
            s.offset,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    // Exactly one whitespace byte separates the header from the payload and
    // token() already consumed it.
    let count = width as u64 * height as u64 * 3;
    check_payload(path, count)?;
    let mut payload = vec![0u8; count as usize];
    s.inner.read_exact(&mut payload).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            IoError::format(path, s.offset, "payload truncated")
        } else {
            IoError::io(path, e)
        }
    })?;
    let data: Vec<f32> = payload.iter().map(|b| *b as f32 / 255.0).collect();
    Ok(FeatureImage::from_data(width, height, 3, data))
}

/// Writes the first three channels of `img` as binary P6; values are clamped
/// to [0,1] and quantized to round(v*255).
pub fn write_ppm(path: &Path, img: &FeatureImage) -> Result<(), IoError> {
    assert!(img.channels() >= 3, "PPM output needs 3 channels");
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format!("P6\n{} {}\n255\n", img.width(), img.height()).as_bytes())
        .map_err(|e| IoError::io(path, e))?;
    let c = img.channels() as usize;
    let mut row = Vec::with_capacity(img.width() as usize * 3);
    for y in 0..img.height() {
        row.clear();
        for x in 0..img.width() {
            let px = img.pixel(x, y);
            for ch in 0..3 {
                let v = (px[ch % c].clamp(0.0, 1.0) * 255.0).round() as u8;
                row.push(v);
            }
        }
        w.write_all(&row).map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}
