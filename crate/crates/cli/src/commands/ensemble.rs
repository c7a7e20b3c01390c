use std::fmt::Write as _;

use stochheat::analysis::{
    energy_constant, energy_estimate_check, gagliardo_bound_check, left_right_gap_check, max_bound_check,
    pathwise_uniqueness_check, run_ensemble, space_translate_check, time_translate_check, EnsembleStats, LevelSpec,
    TranslateSettings,
};
use stochheat::field::CellField;
use stochheat::geometry::Point;
use stochheat::noise::BrownianPath;
use stochheat::solver::ItoConvention;

use super::{analysis_err, assemble, checks_csv, checks_text, solver_err, verdict, CheckLine};
use crate::config::Check;
use crate::{CliError, ExperimentConfig, Output, Verdict};

fn stats_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from(
        "n,t,norm_sq,norm_sq_se,max_norm_sq,max_norm_sq_se,dissipation,dissipation_se,increments,increments_se,energy,energy_se\n",
    );
    for n in 0..=stats.steps {
        let _ = write!(out, "{n},{:.16e}", n as f64 * stats.dt());
        for e in [
            &stats.norm_sq[n],
            &stats.max_norm_sq[n],
            &stats.dissipation[n],
            &stats.increments[n],
            &stats.energy[n],
        ] {
            let _ = write!(out, ",{:.16e},{:.16e}", e.mean, e.std_err);
        }
        out.push('\n');
    }
    out
}

/// Runs the base ensemble and every configured check; each check writes its
/// own CSV next to `checks.csv` and `report.txt`.
pub fn ensemble(config: &ExperimentConfig, out: &Output) -> Result<Verdict, CliError> {
    let opts = &config.ensemble;
    let samples = config.samples()?;
    let mesh = config.mesh()?;
    let scheme = config.scheme()?;
    let model = config.noise()?;
    let u0 = config.initial_field(&mesh)?;
    let operator = assemble(mesh.clone())?;
    let seed = config.seed;
    let wants = |c: Check| opts.checks.contains(&c);

    let stats = run_ensemble(&operator, &scheme, &model, &u0, samples, seed).map_err(analysis_err)?;
    out.write("ensemble.csv", &stats_csv(&stats))?;
    let u0_norm_sq = config.initial_norm_sq(&u0);
    let (c1, _) = energy_constant(&model, scheme.horizon, stats.domain_area, u0_norm_sq, stats.initial_norm_sq());
    let mut lines = Vec::new();

    if wants(Check::Energy) {
        let r = energy_estimate_check(&stats, &model, u0_norm_sq);
        let e = &r.lhs[r.worst_index];
        lines.push(CheckLine::new(
            Check::Energy.name(),
            r.passed,
            format!(
                "C1 = {:.6e}; worst n = {}: LHS = {:.6e} (se {:.2e})",
                r.c1, r.worst_index, e.mean, e.std_err
            ),
        ));
    }
    if wants(Check::Gap) {
        let r = left_right_gap_check(&stats, c1);
        lines.push(CheckLine::new(
            Check::Gap.name(),
            r.passed,
            format!("dt = {:.6e}; gap {:.6e} (se {:.2e}) against C1 dt = {:.6e}", r.dt, r.gap.mean, r.gap.std_err, r.bound),
        ));
    }
    if wants(Check::SpaceTranslate) {
        let path = BrownianPath::sample(seed, scheme.steps, scheme.horizon).map_err(|e| CliError::Config(e.to_string()))?;
        let traj = stochheat::solver::solve_trajectory(&operator, &scheme, &model, &path, &u0).map_err(solver_err)?;
        let mut csv = String::from("eta_x,eta_y,n,t,lhs,bound,ratio\n");
        let mut worst = 0.0f64;
        for &[x, y] in &opts.space_shifts {
            let r = space_translate_check(&traj, Point::new(x, y)).map_err(analysis_err)?;
            for n in 0..r.lhs.len() {
                let _ = writeln!(
                    csv,
                    "{x:.16e},{y:.16e},{n},{:.16e},{:.16e},{:.16e},{:.16e}",
                    traj.time(n),
                    r.lhs[n],
                    r.bound[n],
                    r.ratio[n]
                );
            }
            worst = worst.max(r.max_ratio);
        }
        out.write("space_translate.csv", &csv)?;
        lines.push(CheckLine::new(
            Check::SpaceTranslate.name(),
            worst.is_finite(),
            format!("realization 0; max ratio {worst:.4} over {} shifts", opts.space_shifts.len()),
        ));
    }
    if wants(Check::TimeTranslate) {
        let taus: Vec<f64> = opts.tau_divisors.iter().map(|d| scheme.horizon / d).collect();
        let settings = TranslateSettings {
            max_spread: opts.max_spread,
            slope_range: (opts.slope_range[0], opts.slope_range[1]),
        };
        let r = time_translate_check(&operator, &scheme, &model, &u0, samples, seed, &taus, &settings)
            .map_err(analysis_err)?;
        let left = r.ratios(ItoConvention::Left);
        let running = r.ratios(ItoConvention::Running);
        let mut csv = String::from("tau,left_ratio,left_se,running_ratio,running_se\n");
        for (i, tau) in r.taus.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{tau:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                left[i].mean, left[i].std_err, running[i].mean, running[i].std_err
            );
        }
        out.write("time_translate.csv", &csv)?;
        lines.push(CheckLine::new(
            Check::TimeTranslate.name(),
            r.left_passed && r.running_passed,
            format!(
                "left slope {:.3} spread {:.3}; running slope {:.3} spread {:.3}",
                r.left_slope, r.left_spread, r.running_slope, r.running_spread
            ),
        ));
    }
    if wants(Check::Uniqueness) {
        let shifted: Vec<f64> = u0.values().iter().map(|v| v + opts.uniqueness_shift).collect();
        let u0_b = CellField::new(mesh.clone(), shifted).map_err(|e| CliError::Config(e.to_string()))?;
        let r = pathwise_uniqueness_check(&operator, &scheme, &model, &u0, &u0_b, samples, seed).map_err(analysis_err)?;
        let mut csv = String::from("n,diff_sq,diff_sq_se\n");
        for (n, e) in r.diff_sq.iter().enumerate() {
            let _ = writeln!(csv, "{n},{:.16e},{:.16e}", e.mean, e.std_err);
        }
        out.write("uniqueness.csv", &csv)?;
        lines.push(CheckLine::new(
            Check::Uniqueness.name(),
            r.passed,
            format!(
                "initial gap {:.6e}; worst ratio to the envelope {:.4} (envelope {:.4e})",
                r.initial_diff_sq, r.worst_ratio, r.envelope
            ),
        ));
    }
    level_checks(config, out, &mut lines)?;

    let text = checks_text(&lines);
    out.write("checks.csv", &checks_csv(&lines))?;
    let mut report = String::new();
    let _ = writeln!(report, "samples: {samples}\nseed: {seed}\ncells: {}\nsteps: {}", mesh.num_cells(), scheme.steps);
    report.push_str(&text);
    out.write("report.txt", &report)?;
    print!("{report}");
    Ok(verdict(&lines))
}

fn level_checks(config: &ExperimentConfig, out: &Output, lines: &mut Vec<CheckLine>) -> Result<(), CliError> {
    let opts = &config.ensemble;
    let wanted: Vec<Check> = [Check::Boundedness, Check::Gagliardo]
        .into_iter()
        .filter(|c| opts.checks.contains(c))
        .collect();
    if wanted.is_empty() {
        return Ok(());
    }
    if opts.levels.len() < 2 {
        for c in wanted {
            lines.push(CheckLine::skipped(c.name(), "needs at least two entries in ensemble.levels"));
        }
        return Ok(());
    }
    let samples = config.samples()?;
    let scheme = config.scheme()?;
    let model = config.noise()?;
    let initial = config.analytic_initial()?;
    let meshes = opts
        .levels
        .iter()
        .map(|&n| config.mesh_with_resolution(n))
        .collect::<Result<Vec<_>, _>>()?;

    if wanted.contains(&Check::Boundedness) {
        let stats = meshes
            .iter()
            .map(|mesh| {
                let op = assemble(mesh.clone())?;
                let u0 = initial.project(mesh.clone()).map_err(|e| CliError::Config(e.to_string()))?;
                run_ensemble(&op, &scheme, &model, &u0, samples, config.seed).map_err(analysis_err)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let r = max_bound_check(&stats);
        let mut csv = String::from("cells,h,max_norm_sq,se\n");
        for (mesh, e) in meshes.iter().zip(&r.values) {
            let _ = writeln!(csv, "{},{:.16e},{:.16e},{:.16e}", mesh.num_cells(), mesh.size(), e.mean, e.std_err);
        }
        out.write("boundedness.csv", &csv)?;
        lines.push(CheckLine::new(
            Check::Boundedness.name(),
            r.passed,
            format!("E max ||u^n||^2 over {} levels; largest relative growth {:.4}", stats.len(), r.max_growth),
        ));
    }
    if wanted.contains(&Check::Gagliardo) {
        let levels: Vec<LevelSpec> = meshes.iter().map(|m| LevelSpec::new(m.clone(), scheme.steps)).collect();
        let u0 = move |p: Point| initial.eval(p);
        let r = gagliardo_bound_check(&levels, scheme.horizon, &model, &u0, opts.alpha, samples, config.seed)
            .map_err(analysis_err)?;
        let mut csv = String::from("h,steps,space,space_se,time,time_se\n");
        for l in &r.levels {
            let _ = writeln!(
                csv,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                l.h, l.steps, l.space.mean, l.space.std_err, l.time.mean, l.time.std_err
            );
        }
        out.write("gagliardo.csv", &csv)?;
        lines.push(CheckLine::new(
            Check::Gagliardo.name(),
            r.passed,
            format!(
                "alpha = {}; growth in space {:.4}, in time {:.4}",
                r.alpha, r.space.max_growth, r.time.max_growth
            ),
        ));
    }
    Ok(())
}
