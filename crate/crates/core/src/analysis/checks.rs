use std::sync::Arc;

use super::convergence::LevelSpec;
use super::{check_samples, joint_se, map_realizations, EnsembleStats, Estimate};
use crate::error::{AnalysisError, SolverError};
use crate::field::{l2_norm_sq, CellField, GagliardoWeights, ReconstructionMode, SpaceTimeField};
use crate::geometry::Point;
use crate::noise::{BrownianPath, NoiseModel};
use crate::solver::{project_initial, Scheme, SchemeConfig, TpfaOperator};

/// Relative growth tolerated between refinement levels before a boundedness
/// check fails, on top of four joint standard errors.
pub const GROWTH_ALLOWANCE: f64 = 0.05;

const REL_SLACK: f64 = 1e-12;

/// Returns `(C_1, Upsilon)` with
/// `Upsilon = ((1 + 2 C_L T) E||u_h^0||^2 + 2 C_L |Lambda| T) e^{2 C_L T}` and
/// `C_1 = E||u_0||^2 + 2 C_L T (Upsilon + |Lambda|)`.
pub fn energy_constant(
    model: &NoiseModel,
    horizon: f64,
    domain_area: f64,
    u0_norm_sq: f64,
    discrete_u0_norm_sq: f64,
) -> (f64, f64) {
    let cl = model.growth();
    let upsilon = ((1.0 + 2.0 * cl * horizon) * discrete_u0_norm_sq + 2.0 * cl * domain_area * horizon)
        * (2.0 * cl * horizon).exp();
    let c1 = u0_norm_sq + 2.0 * cl * horizon * (upsilon + domain_area);
    (c1, upsilon)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub c1: f64,
    pub upsilon: f64,
    /// Left-hand side per time index (index 0 is the initial energy).
    pub lhs: Vec<Estimate>,
    /// `max_n (LHS_n - 2 SE) / C_1` over `n = 1..=N`.
    pub worst_ratio: f64,
    pub worst_index: usize,
    pub passed: bool,
}

/// `u0_norm_sq` is `E||u_0||^2` of the continuous initial datum.
pub fn energy_estimate_check(stats: &EnsembleStats, model: &NoiseModel, u0_norm_sq: f64) -> EnergyReport {
    energy_estimate_check_scaled(stats, model, u0_norm_sq, 1.0)
}

/// Same check with every left-hand side multiplied by `lhs_scale`, used to
/// confirm that the detector fires.
pub fn energy_estimate_check_scaled(
    stats: &EnsembleStats,
    model: &NoiseModel,
    u0_norm_sq: f64,
    lhs_scale: f64,
) -> EnergyReport {
    let (c1, upsilon) = energy_constant(
        model,
        stats.horizon,
        stats.domain_area,
        u0_norm_sq,
        stats.initial_norm_sq(),
    );
    let lhs: Vec<Estimate> = stats.energy.iter().map(|e| e.scaled(lhs_scale)).collect();
    let (mut worst_ratio, mut worst_index) = (f64::NEG_INFINITY, 1);
    let mut passed = c1.is_finite();
    for (n, e) in lhs.iter().enumerate().skip(1) {
        let low = e.lower(2.0);
        let ratio = low / c1;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_index = n;
        }
        passed &= e.is_finite() && low <= c1 * (1.0 + REL_SLACK);
    }
    EnergyReport {
        c1,
        upsilon,
        lhs,
        worst_ratio,
        worst_index,
        passed,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub dt: f64,
    /// `E ||u^r - u^l||^2_{L^2(0,T;L^2)} = dt E sum_n ||u^{n+1} - u^n||^2`.
    pub gap: Estimate,
    pub bound: f64,
    pub passed: bool,
}

/// Compares the left/right reconstruction gap with `C_1 dt`.
pub fn left_right_gap_check(stats: &EnsembleStats, c1: f64) -> GapReport {
    let dt = stats.dt();
    let gap = stats.increments[stats.steps].scaled(dt);
    let bound = c1 * dt;
    GapReport {
        dt,
        gap,
        bound,
        passed: gap.is_finite() && gap.lower(2.0) <= bound * (1.0 + REL_SLACK),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundednessReport {
    pub values: Vec<Estimate>,
    /// Largest `(fine - coarse) / coarse` between consecutive levels.
    pub max_growth: f64,
    pub passed: bool,
}

fn level_stability(values: Vec<Estimate>) -> BoundednessReport {
    let mut passed = values.iter().all(Estimate::is_finite);
    let mut max_growth = f64::NEG_INFINITY;
    for w in values.windows(2) {
        let (coarse, fine) = (&w[0], &w[1]);
        if coarse.mean > 0.0 {
            max_growth = max_growth.max((fine.mean - coarse.mean) / coarse.mean);
        }
        let allowed = (1.0 + GROWTH_ALLOWANCE) * coarse.mean + 4.0 * joint_se(coarse, fine);
        passed &= fine.mean <= allowed * (1.0 + REL_SLACK);
    }
    BoundednessReport {
        values,
        max_growth,
        passed,
    }
}

/// `E max_n ||u^n||^2` per level, ordered coarse to fine; passes when the
/// estimates are finite and do not grow with refinement.
pub fn max_bound_check(levels: &[EnsembleStats]) -> BoundednessReport {
    level_stability(levels.iter().map(|s| s.max_norm_sq[s.steps]).collect())
}

/// `||u_a^n - u_b^n||` for `n = 0..=N` along one shared path.
pub fn difference_norms(
    operator: &TpfaOperator,
    config: &SchemeConfig,
    model: &NoiseModel,
    u0_a: &CellField,
    u0_b: &CellField,
    path: &BrownianPath,
) -> Result<Vec<f64>, SolverError> {
    let scheme = Scheme::new(operator, *model, *config)?;
    let a = scheme.solve_trajectory(path, u0_a)?;
    let b = scheme.solve_trajectory(path, u0_b)?;
    Ok(pair_differences(operator, &a, &b).into_iter().map(f64::sqrt).collect())
}

fn pair_differences(operator: &TpfaOperator, a: &SpaceTimeField, b: &SpaceTimeField) -> Vec<f64> {
    let mesh = operator.mesh();
    (0..=a.steps())
        .map(|n| {
            let d: Vec<f64> = a
                .snapshot_values(n)
                .iter()
                .zip(b.snapshot_values(n))
                .map(|(x, y)| x - y)
                .collect();
            l2_norm_sq(mesh, &d)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub initial_diff_sq: f64,
    /// `E ||u_a^n - u_b^n||^2`, `n = 0..=N`.
    pub diff_sq: Vec<Estimate>,
    /// `e^{(1 + C_L) T}`.
    pub envelope: f64,
    pub identical_inputs: bool,
    /// Whether every coupled pair of trajectories agreed bit for bit.
    pub bitwise_equal: bool,
    /// `max_n (E||d^n||^2 - 2 SE) / (envelope ||d^0||^2)`.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Coupled trajectories from two initial fields on identical paths.
pub fn pathwise_uniqueness_check(
    operator: &TpfaOperator,
    config: &SchemeConfig,
    model: &NoiseModel,
    u0_a: &CellField,
    u0_b: &CellField,
    samples: usize,
    master_seed: u64,
) -> Result<UniquenessReport, AnalysisError> {
    check_samples(samples, 2)?;
    let scheme = Scheme::new(operator, *model, *config)?;
    let identical_inputs = u0_a.values() == u0_b.values();
    let runs = map_realizations(samples, |r| {
        let path = BrownianPath::sample_realization(master_seed, r as u64, config.steps, config.horizon)
            .map_err(|e| SolverError::Config(e.to_string()))?;
        let a = scheme.solve_trajectory(&path, u0_a)?;
        let b = scheme.solve_trajectory(&path, u0_b)?;
        let equal = a.snapshots() == b.snapshots();
        Ok((pair_differences(operator, &a, &b), equal))
    })?;
    let bitwise_equal = runs.iter().all(|(_, eq)| *eq);
    let diff_sq: Vec<Estimate> = (0..=config.steps)
        .map(|n| Estimate::from_samples(&runs.iter().map(|(d, _)| d[n]).collect::<Vec<_>>()))
        .collect();
    let initial_diff_sq = diff_sq[0].mean;
    let envelope = ((1.0 + model.growth()) * config.horizon).exp();
    let bound = envelope * initial_diff_sq;
    let worst_ratio = diff_sq
        .iter()
        .map(|e| if bound > 0.0 { e.lower(2.0) / bound } else { e.mean })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut passed = diff_sq
        .iter()
        .all(|e| e.is_finite() && e.lower(2.0) <= bound * (1.0 + REL_SLACK));
    if identical_inputs {
        passed &= bitwise_equal;
    }
    Ok(UniquenessReport {
        initial_diff_sq,
        diff_sq,
        envelope,
        identical_inputs,
        bitwise_equal,
        worst_ratio,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GagliardoLevel {
    pub h: f64,
    pub steps: usize,
    /// `E int_0^T [u^l(t)]^2_{W^{alpha,2}(Lambda)} dt`.
    pub space: Estimate,
    /// `E [u^l]^2_{W^{alpha,2}(0,T;L^2)}`.
    pub time: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GagliardoReport {
    pub alpha: f64,
    pub levels: Vec<GagliardoLevel>,
    pub space: BoundednessReport,
    pub time: BoundednessReport,
    pub passed: bool,
}

/// Both fractional seminorms of the left reconstruction per level, ordered
/// coarse to fine, with independent paths per level.
#[allow(clippy::too_many_arguments)]
pub fn gagliardo_bound_check(
    levels: &[LevelSpec],
    horizon: f64,
    model: &NoiseModel,
    u0: &(dyn Fn(Point) -> f64 + Sync),
    alpha: f64,
    samples: usize,
    master_seed: u64,
) -> Result<GagliardoReport, AnalysisError> {
    check_samples(samples, 2)?;
    if levels.len() < 2 {
        return Err(AnalysisError::Parameter("need at least two levels".into()));
    }
    let mut out = Vec::with_capacity(levels.len());
    for level in levels {
        let mesh: &Arc<_> = &level.mesh;
        let operator = TpfaOperator::assemble(mesh.clone())?;
        let config = SchemeConfig::new(horizon, level.steps)?;
        let scheme = Scheme::new(&operator, *model, config)?;
        let weights = GagliardoWeights::new(mesh, alpha)?;
        let initial = project_initial(u0, mesh.clone())?;
        let runs = map_realizations(samples, |r| {
            let path = BrownianPath::sample_realization(master_seed, r as u64, level.steps, horizon)
                .map_err(|e| SolverError::Config(e.to_string()))?;
            let traj = scheme.solve_trajectory(&path, &initial)?;
            let dt = traj.dt();
            let space: f64 = (0..level.steps)
                .map(|n| dt * weights.seminorm_sq(traj.snapshot_values(n)))
                .sum();
            let time = traj.gagliardo_time_seminorm_sq(alpha, ReconstructionMode::Left)?;
            Ok((space, time))
        })?;
        let space: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let time: Vec<f64> = runs.iter().map(|r| r.1).collect();
        out.push(GagliardoLevel {
            h: mesh.size(),
            steps: level.steps,
            space: Estimate::from_samples(&space),
            time: Estimate::from_samples(&time),
        });
    }
    let space = level_stability(out.iter().map(|l| l.space).collect());
    let time = level_stability(out.iter().map(|l| l.time).collect());
    let passed = space.passed && time.passed;
    Ok(GagliardoReport {
        alpha,
        levels: out,
        space,
        time,
        passed,
    })
}
