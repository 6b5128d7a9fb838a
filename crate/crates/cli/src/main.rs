mod calibrate;
mod eval;
mod pano;
mod plot;
mod selftest;
mod study;
mod synth;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "pfcal", version, about = "Camera calibration from dense perspective fields")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Global {
    /// Random seed.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "PFCAL_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "pfcal-out")]
    pub out: PathBuf,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render ground-truth fields for a camera and gravity, optionally noisy.
    Synth(synth::Args),
    /// Recover intrinsics and gravity from PFF field files.
    Calibrate(calibrate::Args),
    /// Build clips from an equirectangular panorama and trajectories.
    Pano(pano::Args),
    /// Compare predicted results with ground truth.
    Eval(eval::Args),
    /// Focal and gravity error versus number of views, both optimizer modes.
    Study(study::Args),
    /// Quick internal consistency checks.
    Selftest,
}

/// Bad arguments detected after parsing; exits with code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// How a successful run ended.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn ensure_files(paths: &[PathBuf]) -> anyhow::Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(usage(format!("no such file: {}", p.display())));
        }
    }
    Ok(())
}

/// `WxH`.
pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in '{s}'"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in '{s}'"))?;
    Ok((w, h))
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let g = &cli.global;
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build_global()
        .context("cannot start worker threads")?;
    match cli.command {
        Command::Synth(a) => synth::run(g, a),
        Command::Calibrate(a) => calibrate::run(g, a),
        Command::Pano(a) => pano::run(g, a),
        Command::Eval(a) => eval::run(g, a),
        Command::Study(a) => study::run(g, a),
        Command::Selftest => selftest::run(g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: solver did not converge; estimate written anyway");
            ExitCode::from(3)
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
