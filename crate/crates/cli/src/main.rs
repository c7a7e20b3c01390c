use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochheat_cli::{execute, exit_code, Command, Invocation};

#[derive(Parser)]
#[command(name = "stochheat", version, about = "Finite-volume experiments for the stochastic heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides STOCHHEAT_OUT and the config key `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write legacy-VTK files.
    #[arg(long, global = true)]
    vtk: bool,
    /// Worker threads; overrides the config key `parallel`.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build and validate the mesh, print h and reg(T).
    MeshInfo,
    /// One trajectory, written as CSV.
    Run,
    /// Monte Carlo ensemble and the stability checks.
    Ensemble,
    /// Strong errors over nested refinement levels.
    Converge,
    /// Discrete invariants of the mesh, operator and scheme.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let command = match cli.command {
        Cmd::MeshInfo => Command::MeshInfo,
        Cmd::Run => Command::Run,
        Cmd::Ensemble => Command::Ensemble,
        Cmd::Converge => Command::Converge,
        Cmd::Verify => Command::Verify,
    };
    let inv = Invocation {
        command,
        config,
        out: cli.out,
        vtk: cli.vtk,
        parallel: cli.parallel,
    };
    let result = execute(&inv);
    if let Err(e) = &result {
        eprintln!("{e}");
    }
    exit_code(&result)
}
