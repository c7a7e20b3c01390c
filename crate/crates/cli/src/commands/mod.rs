use std::fmt::Write as _;

use stochheat::error::{AnalysisError, SolverError};
use stochheat::io::{field_to_vtk, mesh_to_vtk, trajectory_to_csv};
use stochheat::mesh::validate_admissibility;
use stochheat::noise::BrownianPath;
use stochheat::solver::{solve_trajectory, TpfaOperator};

use crate::{CliError, ExperimentConfig, Output, Verdict};

mod converge;
mod ensemble;
mod verify;

pub use converge::converge;
pub use ensemble::ensemble;
pub use verify::verify;

pub(crate) fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::Config(_) | SolverError::PathMismatch { .. } => CliError::Config(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

pub(crate) fn analysis_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NonNested(_)
        | AnalysisError::Parameter(_)
        | AnalysisError::TooFewSamples { .. }
        | AnalysisError::Noise(_) => CliError::Config(e.to_string()),
        AnalysisError::Solver(s) => solver_err(s),
        _ => CliError::Failed(e.to_string()),
    }
}

/// One row of a pass/fail table; `passed = None` marks a skipped check.
pub(crate) struct CheckLine {
    pub name: String,
    pub passed: Option<bool>,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: Some(passed),
            detail: detail.into(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: None,
            detail: reason.into(),
        }
    }

    fn status(&self) -> &'static str {
        match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        }
    }
}

pub(crate) fn checks_csv(lines: &[CheckLine]) -> String {
    let mut out = String::from("check,status,detail\n");
    for l in lines {
        let _ = writeln!(out, "{},{},\"{}\"", l.name, l.status(), l.detail.replace('"', "\"\""));
    }
    out
}

pub(crate) fn checks_text(lines: &[CheckLine]) -> String {
    let mut out = String::new();
    for l in lines {
        let _ = writeln!(out, "[{}] {}: {}", l.status(), l.name, l.detail);
    }
    out
}

pub(crate) fn verdict(lines: &[CheckLine]) -> Verdict {
    Verdict::from_bool(lines.iter().all(|l| l.passed != Some(false)))
}

pub(crate) fn assemble(mesh: std::sync::Arc<stochheat::mesh::Mesh>) -> Result<TpfaOperator, CliError> {
    TpfaOperator::assemble(mesh).map_err(solver_err)
}

pub fn mesh_info(config: &ExperimentConfig, out: &Output) -> Result<Verdict, CliError> {
    let mesh = config.mesh()?;
    let report = validate_admissibility(&mesh);
    print!("{}", mesh.summary());
    println!("h = {}", mesh.size());
    println!("reg(T) = {}", mesh.regularity());
    if report.is_admissible() {
        println!("admissible");
    } else {
        println!("{} violation(s):", report.violations.len());
        print!("{report}");
    }
    if out.vtk() {
        let areas: Vec<f64> = mesh.cell_areas().collect();
        let path = out.write("mesh.vtk", &mesh_to_vtk(&mesh, "mesh", &[("area", &areas)]))?;
        println!("wrote {}", path.display());
    }
    Ok(Verdict::from_bool(report.is_admissible()))
}

/// Realization 0 of the configured seed, written as CSV.
pub fn run(config: &ExperimentConfig, out: &Output) -> Result<Verdict, CliError> {
    let mesh = config.mesh()?;
    let scheme = config.scheme()?;
    let model = config.noise()?;
    let u0 = config.initial_field(&mesh)?;
    let operator = assemble(mesh.clone())?;
    let path = BrownianPath::sample(config.seed, scheme.steps, scheme.horizon).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = solve_trajectory(&operator, &scheme, &model, &path, &u0).map_err(solver_err)?;

    out.write("trajectory.csv", &trajectory_to_csv(&traj))?;
    out.write("path.csv", &path.to_csv())?;
    out.write("operator.mtx", &operator.matrix().to_matrix_market())?;
    let last = traj.snapshot(traj.steps());
    let mut summary = String::new();
    let _ = writeln!(summary, "cells: {}", mesh.num_cells());
    let _ = writeln!(summary, "steps: {}", traj.steps());
    let _ = writeln!(summary, "dt: {:.16e}", traj.dt());
    let _ = writeln!(summary, "seed: {}", config.seed);
    let _ = writeln!(summary, "brownian_terminal: {:.16e}", path.terminal());
    let _ = writeln!(summary, "initial_mass: {:.16e}", u0.integral());
    let _ = writeln!(summary, "final_mass: {:.16e}", last.integral());
    let _ = writeln!(summary, "final_l2_norm_sq: {:.16e}", last.l2_norm_sq());
    out.write("summary.txt", &summary)?;
    if out.vtk() {
        let every = config.run.vtk_every.max(1);
        for n in (0..=traj.steps()).filter(|n| n % every == 0 || *n == traj.steps()) {
            out.write(&format!("vtk/u_{n:05}.vtk"), &field_to_vtk(&traj.snapshot(n), "u"))?;
        }
    }
    print!("{summary}");
    println!("wrote {}", out.dir().display());
    Ok(Verdict::Pass)
}
