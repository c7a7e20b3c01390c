use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochheat::field::{discrete_partial_integration_residual, CellField};
use stochheat::mesh::{validate_admissibility, Mesh};
use stochheat::noise::BrownianPath;
use stochheat::solver::{
    dense_cholesky_solve, solve_linear_system, solve_trajectory, CsrMatrix, TpfaOperator, DENSE_ORACLE_LIMIT,
};

use super::{checks_csv, checks_text, solver_err, verdict, CheckLine};
use crate::{CliError, ExperimentConfig, Output, Verdict};

const ROUNDOFF: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-8;

fn random_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn edge_form(mesh: &Mesh, w: &[f64], v: &[f64]) -> f64 {
    mesh.interior_edges()
        .iter()
        .map(|e| {
            let [k, l] = e.cells;
            e.transmissibility() * (w[k] - w[l]) * (v[k] - v[l])
        })
        .sum()
}

/// The assembled flux matrix; with `fault` one off-diagonal entry is scaled so
/// that symmetry and conservation break.
fn flux_matrix(operator: &TpfaOperator, fault: bool) -> CsrMatrix {
    let a = operator.matrix();
    if !fault {
        return a.clone();
    }
    let mut triplets: Vec<(usize, usize, f64)> = (0..a.dim()).flat_map(|i| a.row(i).map(move |(j, v)| (i, j, v))).collect();
    if let Some(t) = triplets.iter_mut().find(|(i, j, _)| i != j) {
        t.2 *= 1.5;
    }
    CsrMatrix::from_triplets(a.dim(), &triplets)
}

fn shifted(a: &CsrMatrix, mass: &[f64], dt: f64) -> CsrMatrix {
    let mut triplets: Vec<(usize, usize, f64)> = (0..a.dim())
        .flat_map(|i| a.row(i).map(move |(j, v)| (i, j, dt * v)))
        .collect();
    triplets.extend(mass.iter().enumerate().map(|(k, &m)| (k, k, m)));
    CsrMatrix::from_triplets(a.dim(), &triplets)
}

/// Discrete invariants of the configured mesh, operator and scheme.
pub fn verify(config: &ExperimentConfig, out: &Output) -> Result<Verdict, CliError> {
    let mesh: Arc<Mesh> = config.mesh()?;
    let scheme = config.scheme()?;
    let model = config.noise()?;
    let u0 = config.initial_field(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let trials = config.verify.random_fields.max(1);
    let n = mesh.num_cells();
    let mut lines = Vec::new();

    let report = validate_admissibility(&mesh);
    lines.push(CheckLine::new(
        "admissibility",
        report.is_admissible(),
        format!("{} violation(s)", report.violations.len()),
    ));
    if !report.is_admissible() {
        return finish(out, lines);
    }
    let operator = TpfaOperator::assemble_unchecked(mesh.clone());
    let a = flux_matrix(&operator, config.verify.inject_fault);

    let mut gradient = 0.0f64;
    let mut partial = 0.0f64;
    let mut matrix_form = 0.0f64;
    let mut rayleigh = f64::INFINITY;
    for _ in 0..trials {
        let w = CellField::new(mesh.clone(), random_values(n, &mut rng)).map_err(|e| CliError::Failed(e.to_string()))?;
        let v = CellField::new(mesh.clone(), random_values(n, &mut rng)).map_err(|e| CliError::Failed(e.to_string()))?;
        let semi = w.h1_seminorm_sq();
        if semi > 0.0 {
            gradient = gradient.max((w.gradient_l2_sq() - 2.0 * semi).abs() / semi);
        }
        let scale = edge_form(&mesh, w.values(), w.values()).sqrt() * edge_form(&mesh, v.values(), v.values()).sqrt();
        let scale = scale.max(f64::MIN_POSITIVE);
        let r = discrete_partial_integration_residual(&w, &v).map_err(|e| CliError::Failed(e.to_string()))?;
        partial = partial.max(r.abs() / scale);
        let mut av = vec![0.0; n];
        a.apply(v.values(), &mut av);
        let wav: f64 = w.values().iter().zip(&av).map(|(x, y)| x * y).sum();
        matrix_form = matrix_form.max((wav - edge_form(&mesh, w.values(), v.values())).abs() / scale);
        let top = a.diagonal().iter().fold(0.0f64, |m, &d| m.max(d));
        rayleigh = rayleigh.min(a.quadratic_form(w.values()) / (w.l2_norm_sq() * top));
    }
    lines.push(CheckLine::new(
        "gradient_identity",
        gradient <= ROUNDOFF,
        format!("max relative defect {gradient:.3e} over {trials} fields"),
    ));
    lines.push(CheckLine::new(
        "partial_integration",
        partial <= ROUNDOFF && matrix_form <= ROUNDOFF,
        format!("field residual {partial:.3e}; matrix residual {matrix_form:.3e}"),
    ));

    let symmetric = a.is_symmetric();
    let row_defect = (0..n)
        .map(|i| {
            let (sum, abs) = a.row(i).fold((0.0, 0.0), |(s, t), (_, v)| (s + v, t + v.abs()));
            if abs > 0.0 {
                sum.abs() / abs
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let sign_ok = (0..n).all(|i| a.row(i).all(|(j, v)| if i == j { v >= 0.0 } else { v <= 0.0 }));
    let shifted_matrix = shifted(&a, operator.mass(), scheme.dt());
    let factorizes = if n <= DENSE_ORACLE_LIMIT {
        dense_cholesky_solve(&shifted_matrix, &vec![1.0; n]).is_ok()
    } else {
        true
    };
    lines.push(CheckLine::new(
        "operator_spd",
        symmetric && row_defect <= ROUNDOFF && sign_ok && rayleigh >= -ROUNDOFF && factorizes,
        format!(
            "symmetric {symmetric}; row-sum defect {row_defect:.3e}; M-matrix signs {sign_ok}; min Rayleigh quotient {:.3e}; Cholesky of M + dt A {}",
            rayleigh,
            if n <= DENSE_ORACLE_LIMIT { if factorizes { "ok" } else { "failed" } } else { "skipped" }
        ),
    ));

    if n <= DENSE_ORACLE_LIMIT {
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let b = random_values(n, &mut rng);
            let exact = dense_cholesky_solve(&shifted_matrix, &b);
            let iterative = solve_linear_system(&shifted_matrix, &b, scheme.tolerance, scheme.max_iterations_for(n));
            match (exact, iterative) {
                (Ok(x), Ok((y, _))) => {
                    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                    let diff = x.iter().zip(&y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                    worst = worst.max(diff / norm);
                }
                _ => worst = f64::INFINITY,
            }
        }
        lines.push(CheckLine::new(
            "dense_oracle",
            worst <= ORACLE_TOL,
            format!("max relative |x_cg - x_dense| {worst:.3e} over {trials} right-hand sides"),
        ));
    } else {
        lines.push(CheckLine::skipped("dense_oracle", format!("{n} cells exceed {DENSE_ORACLE_LIMIT}")));
    }

    let path = BrownianPath::sample(config.seed, scheme.steps, scheme.horizon).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = solve_trajectory(&operator, &scheme, &model, &path, &u0).map_err(solver_err)?;
    let mut mass_defect = 0.0f64;
    for (step, dw) in path.increments().iter().enumerate() {
        let before = traj.snapshot(step);
        let after = traj.snapshot_values(step + 1);
        let m = operator.mass();
        let change: f64 = after.iter().zip(before.values()).zip(m).map(|((x, y), m)| m * (x - y)).sum();
        let forcing = model.eval_g(&before).integral() * dw;
        let scale: f64 = before.values().iter().zip(m).map(|(v, m)| m * v.abs()).sum::<f64>() + forcing.abs();
        if scale > 0.0 {
            mass_defect = mass_defect.max((change - forcing).abs() / scale);
        }
    }
    lines.push(CheckLine::new(
        "mass_balance",
        mass_defect <= 1e-11,
        format!("max relative defect {mass_defect:.3e} over {} steps", scheme.steps),
    ));
    finish(out, lines)
}

fn finish(out: &Output, lines: Vec<CheckLine>) -> Result<Verdict, CliError> {
    out.write("verify.csv", &checks_csv(&lines))?;
    print!("{}", checks_text(&lines));
    Ok(verdict(&lines))
}
