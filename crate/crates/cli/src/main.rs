//! `covcalc`: covariance measures, path simulation, integrals and verification suites.
//!
//! Exit status: 0 when every hard check passes, 1 on a failed check, 2 on a
//! configuration error, 3 on a numerical failure such as a non-PSD Gram matrix.

mod commands;
mod config;
mod integrand;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{ConfigFile, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "covcalc", version, about = "Covariance measure calculus for Gaussian processes")]
struct Cli {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "COVCALC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Kernel spec, e.g. `fbm:H=0.7` or `bifbm:H=0.75,K=2/3`.
    #[arg(long)]
    kernel: Option<String>,
    /// Grid cells.
    #[arg(long)]
    n: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo tolerance in standard errors.
    #[arg(long)]
    mc_sigmas: Option<f64>,
    /// Tolerance of grid-exact identities.
    #[arg(long)]
    exact_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the covariance measure and summarise it.
    Measure {
        #[command(flatten)]
        common: Common,
        /// CSV of nonzero cell masses.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `.bin` for the binary format, anything else for CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte Carlo mean of an integral.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// wiener, forward, backward, symmetric or skorohod-trace.
        #[arg(long)]
        mode: Option<String>,
        /// `indicator:a,b`, `step:[(a,b,v),...]` or `fprime:poly:c0,c1,...`.
        #[arg(long)]
        integrand: Option<String>,
        #[arg(long)]
        upto: Option<f64>,
        /// Regularization width, a multiple of the grid step.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run verification suites.
    Verify {
        #[command(flatten)]
        common: Common,
        /// qv, ito, gamma, chaos, quasihelix or all.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Directory for CSV series.
        #[arg(long)]
        plotdata: Option<PathBuf>,
        /// Covariation widths for the qv suite.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Grid sizes for the ito suite.
        #[arg(long, value_delimiter = ',')]
        scan: Option<Vec<usize>>,
        /// Chaos truncation order.
        #[arg(long, allow_negative_numbers = true)]
        order: Option<i64>,
    },
    /// Print the checks of a saved JSON report.
    Report { file: PathBuf },
}

fn flags(common: Common) -> ConfigFile {
    let tolerances = if common.mc_sigmas.is_some() || common.exact_tol.is_some() {
        Some(config::ToleranceFile {
            mc_sigmas: common.mc_sigmas,
            exact: common.exact_tol,
        })
    } else {
        None
    };
    ConfigFile {
        kernel: common.kernel,
        n: common.n,
        horizon: common.horizon,
        paths: common.paths,
        seed: common.seed,
        tolerances,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let base = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let command = cli.command;
    let (mut overrides, action): (ConfigFile, fn(&RunConfig) -> commands::Outcome) = match command {
        Command::Report { file } => return commands::report(&file),
        Command::Measure { common, out, json } => (ConfigFile { out, json, ..flags(common) }, commands::measure),
        Command::Simulate { common, out, json } => (ConfigFile { out, json, ..flags(common) }, commands::simulate),
        Command::Integrate {
            common,
            mode,
            integrand,
            upto,
            eps,
            json,
        } => (
            ConfigFile {
                mode,
                integrand,
                upto,
                eps: eps.map(|e| vec![e]),
                json,
                ..flags(common)
            },
            commands::integrate,
        ),
        Command::Verify {
            common,
            suite,
            json,
            plotdata,
            eps,
            scan,
            order,
        } => (
            ConfigFile {
                suite,
                json,
                plotdata,
                eps,
                scan,
                chaos: order.map(|o| config::ChaosFile {
                    order: Some(o),
                    ..Default::default()
                }),
                ..flags(common)
            },
            commands::verify,
        ),
    };
    overrides.threads = cli.threads;
    let cfg = RunConfig::resolve(overrides.over(base))?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot start {t} threads: {e}")))?;
    }
    action(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Checks => eprintln!("covcalc: checks failed"),
                Failure::Config(msg) => eprintln!("covcalc: configuration error: {msg}"),
                Failure::Numerical(msg) => eprintln!("covcalc: numerical failure: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
