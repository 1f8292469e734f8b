use clap::{Parser, Subcommand};
use spings_cli::config::{ConfigError, RunConfig};
use spings_cli::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spings",
    about = "Ground states of rotating spin-orbit-coupled spin-1 condensates",
    version
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory (overrides [output] directory).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy from one initial guess and write the state,
    /// convergence log, summary and densities.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve once per initial guess and keep the lowest-energy state.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the conjugate gradient and gradient flow solvers on the same
    /// problem and tabulate both convergence histories.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print stationarity diagnostics of a stored field.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
    },
    /// Mesh-halving accuracy study against a fine reference.
    ConvergenceStudy {
        #[arg(long)]
        config: PathBuf,
        /// Reference field file; computed on a doubled grid when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, ConfigError> {
    RunConfig::from_file(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore the error when a pool already exists (tests, repeated init).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out = cli.output.as_deref();
    let result: anyhow::Result<i32> = (|| {
        let code = match &cli.command {
            Command::Solve { config } => match load(config) {
                Ok(cfg) => runner::run_solve(&cfg, out)?,
                Err(e) => return config_failure(config, e),
            },
            Command::Sweep { config } => match load(config) {
                Ok(cfg) => runner::run_sweep(&cfg, out)?,
                Err(e) => return config_failure(config, e),
            },
            Command::Compare { config } => match load(config) {
                Ok(cfg) => runner::run_compare(&cfg, out)?,
                Err(e) => return config_failure(config, e),
            },
            Command::Diagnose { config, field } => match load(config) {
                Ok(cfg) => runner::run_diagnose(field, &cfg)?,
                Err(e) => return config_failure(config, e),
            },
            Command::ConvergenceStudy { config, reference } => match load(config) {
                Ok(cfg) => runner::run_study(&cfg, reference.as_deref(), out)?,
                Err(e) => return config_failure(config, e),
            },
        };
        Ok(code)
    })();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn config_failure(path: &PathBuf, e: ConfigError) -> anyhow::Result<i32> {
    eprintln!("{}: {e}", path.display());
    Ok(runner::EXIT_CONFIG)
}
