//! `sts`: surround-view temporal stereo depth on synthetic scenes.
//!
//! Three subcommands share one configuration:
//! - `simulate` renders a scene to feature/depth tensors plus masks,
//! - `sweep` runs the full stereo + fusion pipeline and writes metrics,
//! - `eval` scores a predicted depth tensor against a ground-truth tensor.
//!
//! Exit codes: 0 success, 2 bad input (missing files, bad flags or config),
//! 3 malformed data file, 4 numeric contract violation. `STS_THREADS` caps
//! worker threads (0 or unset picks the machine default).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sts_core::hypotheses::DepthMode;
use sts_core::sweep::SweepMode;

use config::RunConfig;

/// An error bound to the process exit code it must produce.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }

    pub fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 4,
            error: error.into(),
        }
    }
}

/// Attaches an exit code to the error side of an ordinary `Result`.
pub trait ExitWith<T> {
    fn or_input(self) -> CmdResult<T>;
    fn or_data(self) -> CmdResult<T>;
    fn or_numeric(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn or_input(self) -> CmdResult<T> {
        self.map_err(Failure::input)
    }

    fn or_data(self) -> CmdResult<T> {
        self.map_err(Failure::data)
    }

    fn or_numeric(self) -> CmdResult<T> {
        self.map_err(Failure::numeric)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Surround,
    #[value(name = "same_camera")]
    SameCamera,
}

#[derive(Copy, Clone, ValueEnum)]
enum DepthModeArg {
    Sid,
    Ud,
}

#[derive(Parser)]
#[command(
    name = "sts",
    version,
    about = "Surround-view temporal stereo depth on synthetic scenes"
)]
struct Cli {
    /// Key-value config file; the flags below override its values.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,

    /// Which source cameras feed each reference camera's sweep.
    #[arg(long, value_enum, global = true)]
    mode: Option<ModeArg>,

    /// Depth discretization of the hypothesis planes.
    #[arg(long = "depth-mode", value_enum, global = true)]
    depth_mode: Option<DepthModeArg>,

    /// Number of swept depth hypotheses.
    #[arg(long = "stereo-bins", value_name = "N", global = true)]
    stereo_bins: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,

    /// Scene seed override; 0 keeps the scene's own seed.
    #[arg(long, value_name = "N", global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the scene: feature tensors, ground-truth depth, masks, manifest.
    Simulate,
    /// Run stereo matching, mono fusion, depth decoding, BEV lifting, metrics.
    Sweep,
    /// Score a predicted depth tensor against a ground-truth depth tensor.
    Eval {
        /// Predicted depth tensor (rank 2, meters).
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Ground-truth depth tensor (rank 2, meters; 0 = unobserved).
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
    },
}

/// Worker cap from `STS_THREADS`; 0 or unset means the rayon default.
fn thread_cap() -> CmdResult<usize> {
    match std::env::var("STS_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::input(anyhow::anyhow!("STS_THREADS must be an integer, got '{s}'"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> CmdResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap()?)
        .build()
        .or_input()?;

    let mut cfg = RunConfig::load(cli.config.as_deref()).or_input()?;
    if let Some(mode) = cli.mode {
        cfg.sweep_mode = match mode {
            ModeArg::Surround => SweepMode::Surround,
            ModeArg::SameCamera => SweepMode::SameCamera,
        };
    }
    if let Some(mode) = cli.depth_mode {
        cfg.depth_mode = match mode {
            DepthModeArg::Sid => DepthMode::Sid,
            DepthModeArg::Ud => DepthMode::Uniform,
        };
    }
    if let Some(n) = cli.stereo_bins {
        cfg.stereo_bins = n;
    }
    if let Some(dir) = cli.out {
        cfg.out_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().or_input()?;

    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Eval { pred, truth } => commands::eval(&cfg, &pred, &truth),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
