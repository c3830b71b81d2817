//! `eieg`: experiments for elastic-interaction-energy generative models.
//!
//! Exit codes: 0 on success, 2 for a bad configuration or input file, 3 when
//! a run aborts on a non-finite or diverging value, 1 for I/O failures.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{EvalFile, FlowFile, KernelProbeFile, SpectralFile, TrainFile};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical abort: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<eieg_core::Error> for Failure {
    fn from(e: eieg_core::Error) -> Self {
        use eieg_core::Error::*;
        match e {
            NonFinite { .. } | Divergence { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "eieg", version, about = "Elastic interaction energy generative modeling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("eieg-out"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator against an elastic discriminator.
    GanTrain(Common),
    /// Train a generator on the elastic energy in data space.
    EiegTrain(Common),
    /// Run the interacting-particle sampler.
    Flow(Common),
    /// Measure growth rates of perturbed constant densities.
    Spectral(Common),
    /// Mode coverage and KDE of a samples CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Samples CSV; overrides `samples` in the config.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Tabulate kernel values and radial derivatives.
    KernelProbe {
        #[command(flatten)]
        common: Common,
        /// Exponent dimension n.
        #[arg(long)]
        n: Option<u32>,
        /// Kernel cutoff R.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Stabilizer order m.
        #[arg(long)]
        m: Option<u32>,
        /// Stabilizer cutoff.
        #[arg(long)]
        rs: Option<f64>,
        /// Stabilizer weight.
        #[arg(long)]
        eps: Option<f64>,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GanTrain(c) => {
            let file: TrainFile = commands::load(c.config.as_deref())?;
            commands::train("gan-train", file, c.seed, &c.out_dir())
        }
        Command::EiegTrain(c) => {
            let file: TrainFile = commands::load(c.config.as_deref())?;
            commands::train("eieg-train", file, c.seed, &c.out_dir())
        }
        Command::Flow(c) => {
            let file: FlowFile = commands::load(c.config.as_deref())?;
            commands::flow(file, c.seed, &c.out_dir())
        }
        Command::Spectral(c) => {
            let file: SpectralFile = commands::load(c.config.as_deref())?;
            commands::spectral(file, &c.out_dir())
        }
        Command::Eval { common, samples } => {
            let file: EvalFile = commands::load(common.config.as_deref())?;
            commands::eval(file, samples, &common.out_dir())
        }
        Command::KernelProbe { common, n, cutoff, m, rs, eps, r } => {
            let mut file: KernelProbeFile = commands::load(common.config.as_deref())?;
            if let Some(v) = n {
                file.kernel.dim_n = v;
            }
            if let Some(v) = cutoff {
                file.kernel.cutoff = v;
            }
            if let Some(v) = m {
                file.stabilizer.order_m = v;
            }
            if let Some(v) = rs {
                file.stabilizer.cutoff = v;
            }
            if let Some(v) = eps {
                file.stabilizer.weight = v;
            }
            if let Some(v) = r {
                file.r = v;
            }
            commands::kernel_probe(file, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("eieg: {f}");
            ExitCode::from(f.code())
        }
    }
}
