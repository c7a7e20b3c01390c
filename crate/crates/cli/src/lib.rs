//! Configuration-driven experiments on top of the `stochheat` library.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or a solver
//! failure, 2 on usage and configuration errors.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

pub mod commands;
pub mod config;
mod output;

pub use config::ExperimentConfig;
pub use output::Output;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Failed(_) => 1,
        }
    }
}

/// Whether a command's checks all held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(passed: bool) -> Self {
        if passed {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    MeshInfo,
    Run,
    Ensemble,
    Converge,
    Verify,
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub vtk: bool,
    pub parallel: Option<usize>,
}

/// Output directory precedence: `--out`, then `STOCHHEAT_OUT`, then the
/// config key `output`, then `stochheat-out`.
pub fn output_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("STOCHHEAT_OUT").map(PathBuf::from))
        .or_else(|| config.output.as_ref().map(|p| config.base_dir.join(p)))
        .unwrap_or_else(|| PathBuf::from("stochheat-out"))
}

pub fn execute(inv: &Invocation) -> Result<Verdict, CliError> {
    let config = ExperimentConfig::load(&inv.config)?;
    let threads = inv.parallel.or(config.parallel).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out = Output::new(output_dir(inv.out.clone(), &config), inv.vtk);
    pool.install(|| match inv.command {
        Command::MeshInfo => commands::mesh_info(&config, &out),
        Command::Run => commands::run(&config, &out),
        Command::Ensemble => commands::ensemble(&config, &out),
        Command::Converge => commands::converge(&config, &out),
        Command::Verify => commands::verify(&config, &out),
    })
}

pub fn exit_code(result: &Result<Verdict, CliError>) -> ExitCode {
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => ExitCode::from(e.exit_code()),
    }
}
