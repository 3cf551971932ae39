//! Command-line front end: simulate -> render -> eval pipelines plus the
//! MPC-vs-sweep coverage experiment.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mpcview_core::config::{
    CompareConfig, RunConfig, SceneConfig, VolumeKind,
};
use mpcview_core::io::{read_volume, VolumeFile};
use mpcview_core::pipeline::{self, preset};

/// Environment variable overriding every command's output directory.
const OUTPUT_DIR_ENV: &str = "MPCVIEW_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "mpcview",
    about = "Sparse-RGBD free-viewpoint rendering with multi-layer point cloud volumes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic RGBD sequence from a scene description.
    Simulate(SimulateArgs),
    /// Run the full rendering pipeline over a captured sequence.
    Render(RenderArgs),
    /// Compare rendered frames against the ground-truth cameras.
    Eval(EvalArgs),
    /// Coverage and fidelity of MPC vs the novel-view sweep baseline.
    CompareSweep(CompareSweepArgs),
    /// Print the header and stats of a stored volume file.
    VolumeDump(VolumeDumpArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene JSON path, or `preset:slant-sweep` for the tilted-patch suite.
    #[arg(long)]
    scene: String,
    /// Output sequence directory (suite root for presets).
    #[arg(long)]
    out: PathBuf,
    /// Override the scene's frame count.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    frames: Option<u32>,
    /// Override the sensor seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Image size for presets, WIDTHxHEIGHT.
    #[arg(long, default_value = "640x480")]
    size: String,
}

#[derive(Args)]
struct RenderArgs {
    /// Run-config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Volume construction: mpc or sweep.
    #[arg(long)]
    volume: Option<String>,
    /// Enable the 2x-resolution pass.
    #[arg(long)]
    highres: bool,
    /// Odd sliding-window size for temporal averaging.
    #[arg(long)]
    temporal_window: Option<u32>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<u32>,
    /// Persist per-frame MPC volumes next to the rendered images.
    #[arg(long)]
    dump_volumes: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequence directory (holds the ground truth).
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Render output directory to evaluate (metrics are written here too).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareSweepArgs {
    /// Suite root holding angle_<deg>/ sequences (from preset:slant-sweep).
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Coverage tolerance in meters.
    #[arg(long, default_value_t = 0.005)]
    tolerance: f64,
    #[arg(long)]
    jobs: Option<u32>,
}

#[derive(Args)]
struct VolumeDumpArgs {
    file: PathBuf,
}

fn output_override(dir: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .or(dir)
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let (w, h) = s
        .split_once('x')
        .with_context(|| format!("--size must be WIDTHxHEIGHT, got {s:?}"))?;
    Ok((w.parse()?, h.parse()?))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let out = output_override(Some(args.out)).expect("output dir");
    if let Some(preset_name) = args.scene.strip_prefix("preset:") {
        match preset_name {
            "slant-sweep" => {
                let (w, h) = parse_size(&args.size)?;
                let dirs = preset::generate_slant_sweep(&out, w, h)?;
                for (angle, dir) in &dirs {
                    println!("angle {angle:>2} deg -> {}", dir.display());
                }
                println!("wrote {} sequences under {}", dirs.len(), out.display());
                return Ok(());
            }
            other => bail!("unknown preset {other:?} (available: slant-sweep)"),
        }
    }
    let mut cfg =
        SceneConfig::load(&PathBuf::from(&args.scene)).context("loading scene config")?;
    if let Some(frames) = args.frames {
        cfg.num_frames = frames;
    }
    if let Some(seed) = args.seed {
        cfg.sensor.seed = seed;
    }
    let paths = pipeline::run_simulate(&cfg, &out)?;
    println!("wrote sequence to {}", paths.root.display());
    Ok(())
}

fn load_run_config(
    config: Option<PathBuf>,
    sequence: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seq) = sequence {
        cfg.sequence_dir = seq;
    }
    if let Some(out) = output_override(out) {
        cfg.output_dir = out;
    }
    if cfg.sequence_dir.as_os_str().is_empty() {
        bail!("no sequence directory: pass --sequence or set it in --config");
    }
    if cfg.output_dir.as_os_str().is_empty() {
        bail!("no output directory: pass --out, set {OUTPUT_DIR_ENV}, or use --config");
    }
    Ok(cfg)
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let mut cfg = load_run_config(args.config, args.sequence, args.out)?;
    if let Some(vol) = args.volume {
        cfg.volume.kind = match vol.as_str() {
            "mpc" => VolumeKind::Mpc,
            "sweep" => VolumeKind::Sweep,
            other => bail!("--volume must be mpc or sweep, got {other:?}"),
        };
    }
    if args.highres {
        cfg.render.highres = true;
    }
    if let Some(w) = args.temporal_window {
        cfg.render.temporal_window = w;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    if args.dump_volumes {
        cfg.render.dump_volumes = true;
    }

    let summary = pipeline::run_render(&cfg)?;
    for r in &summary.records {
        println!(
            "frame {:>3} @ {}: volume {:.0} ms, aggregate {:.0} ms, density {:.0} ms, render {:.0} ms, background {:.0} ms{} (total {:.0} ms)",
            r.frame,
            r.camera,
            r.timings.volume_ms,
            r.timings.aggregate_ms,
            r.timings.density_ms,
            r.timings.render_ms,
            r.timings.background_ms,
            if cfg.render.highres {
                format!(", highres {:.0} ms", r.timings.highres_ms)
            } else {
                String::new()
            },
            r.timings.total_ms
        );
    }
    println!("renders written to {}", summary.output_dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_run_config(args.config, args.sequence, args.out)?;
    let summary = pipeline::run_eval(&cfg)?;
    for entry in &summary.report.entries {
        println!("{:<10} [{}] = {:.4}", entry.metric, entry.mask, entry.value);
    }
    println!(
        "per-frame metrics in {}",
        cfg.output_dir.join("metrics.csv").display()
    );
    Ok(())
}

fn cmd_compare_sweep(args: CompareSweepArgs) -> Result<()> {
    let out = output_override(Some(args.out)).expect("output dir");
    let mut cfg = CompareConfig::new(args.suite, out);
    cfg.tolerance = args.tolerance;
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    let summary = pipeline::run_compare_sweep(&cfg)?;
    println!("angle  cover(mpc)  cover(sweep)  psnr_fg(mpc)  psnr_fg(sweep)");
    for r in &summary.rows {
        println!(
            "{:>5}  {:>10.4}  {:>12.4}  {:>12.2}  {:>14.2}",
            r.angle_deg,
            r.coverage_mpc,
            r.coverage_sweep,
            r.psnr_foreground_mpc,
            r.psnr_foreground_sweep
        );
    }
    if summary.mpc_covers_at_least_sweep_everywhere {
        println!("mpc coverage >= sweep coverage at every angle");
    } else {
        println!("WARNING: sweep coverage exceeded mpc coverage at some angle");
    }
    Ok(())
}

fn cmd_volume_dump(args: VolumeDumpArgs) -> Result<()> {
    match read_volume(&args.file)? {
        VolumeFile::Mpc(parts) => {
            let valid = parts.valid.iter().filter(|v| **v).count();
            println!(
                "MPCV depth volume: {} views x {} offsets x {}x{}",
                parts.views,
                parts.offsets.len(),
                parts.height,
                parts.width
            );
            println!("offsets (m): {:?}", parts.offsets);
            println!(
                "valid candidates: {valid}/{} ({:.1}%)",
                parts.valid.len(),
                100.0 * valid as f64 / parts.valid.len().max(1) as f64
            );
        }
        VolumeFile::Feature(f) => println!(
            "FCV1 feature volume: {} layers x {}x{} x {} channels",
            f.layers, f.height, f.width, f.channels
        ),
        VolumeFile::Cost(c) => {
            let usable = c.view_count.iter().filter(|n| **n >= 2).count();
            println!(
                "FCV1 cost volume: {} layers x {}x{}, {usable} candidates with >= 2 views",
                c.layers, c.height, c.width
            );
        }
        VolumeFile::Density(d) => {
            let active = d.values.iter().filter(|s| **s > 0.0).count();
            println!(
                "FCV1 density volume: {} layers x {}x{}, {active} non-zero opacities",
                d.layers, d.height, d.width
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Render(args) => cmd_render(args),
        Command::Eval(args) => cmd_eval(args),
        Command::CompareSweep(args) => cmd_compare_sweep(args),
        Command::VolumeDump(args) => cmd_volume_dump(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
