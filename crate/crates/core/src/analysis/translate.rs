use std::sync::Arc;

use super::{check_samples, log_log_slope, map_realizations, Estimate};
use crate::error::{AnalysisError, SolverError};
use crate::field::{h1_seminorm_sq, l2_norm_sq, CellField, SpaceTimeField};
use crate::geometry::{self, Point};
use crate::mesh::Mesh;
use crate::noise::{BrownianPath, NoiseModel};
use crate::quadrature::GaussLegendre;
use crate::solver::{ito_partial_sums, ItoConvention, Scheme, SchemeConfig, TpfaOperator};

/// Exact overlap data for `x -> w(x + eta)` with zero extension outside the
/// domain.
#[derive(Clone, Debug)]
pub struct ShiftOverlap {
    mesh: Arc<Mesh>,
    eta: Point,
    /// `(K, L, |(K - eta) cap L|)` for every overlapping pair.
    pairs: Vec<(usize, usize, f64)>,
    /// Area of `K - eta` outside the domain.
    leaving: Vec<f64>,
    /// Area of `L` shifted onto the exterior.
    entering: Vec<f64>,
}

impl ShiftOverlap {
    pub fn new(mesh: Arc<Mesh>, eta: Point) -> Self {
        let shifted: Vec<Vec<Point>> = mesh
            .cells()
            .iter()
            .map(|c| c.vertices.iter().map(|&v| v - eta).collect())
            .collect();
        let boxes: Vec<_> = mesh.cells().iter().map(|c| geometry::bounding_box(&c.vertices)).collect();
        let shifted_boxes: Vec<_> = shifted.iter().map(|p| geometry::bounding_box(p)).collect();
        let n = mesh.num_cells();
        let mut pairs = Vec::new();
        let mut leaving: Vec<f64> = mesh.cell_areas().collect();
        let mut entering = leaving.clone();
        for k in 0..n {
            let (lo_k, hi_k) = shifted_boxes[k];
            for l in 0..n {
                let (lo_l, hi_l) = boxes[l];
                if lo_k.x >= hi_l.x || lo_l.x >= hi_k.x || lo_k.y >= hi_l.y || lo_l.y >= hi_k.y {
                    continue;
                }
                let area = geometry::convex_overlap_area(&shifted[k], &mesh.cells()[l].vertices);
                if area > 0.0 {
                    pairs.push((k, l, area));
                    leaving[k] -= area;
                    entering[l] -= area;
                }
            }
        }
        for v in leaving.iter_mut().chain(entering.iter_mut()) {
            *v = v.max(0.0);
        }
        Self {
            mesh,
            eta,
            pairs,
            leaving,
            entering,
        }
    }

    pub fn eta(&self) -> Point {
        self.eta
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `int_{R^2} |w(x + eta) - w(x)|^2 dx`.
    pub fn translate_sq(&self, values: &[f64]) -> f64 {
        let inner: f64 = self
            .pairs
            .iter()
            .map(|&(k, l, a)| a * (values[k] - values[l]) * (values[k] - values[l]))
            .sum();
        let strips: f64 = values
            .iter()
            .zip(self.leaving.iter().zip(&self.entering))
            .map(|(v, (a, b))| (a + b) * v * v)
            .sum();
        inner + strips
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTranslateReport {
    pub eta: Point,
    /// Per snapshot `n = 0..=N`.
    pub lhs: Vec<f64>,
    /// `|eta| (|u|_{1,h}^2 + ||u||^2)`.
    pub bound: Vec<f64>,
    pub ratio: Vec<f64>,
    pub max_ratio: f64,
}

pub fn space_translate_check(trajectory: &SpaceTimeField, eta: Point) -> Result<SpaceTranslateReport, AnalysisError> {
    let size = eta.norm();
    if !(size > 0.0 && size.is_finite()) {
        return Err(AnalysisError::Parameter(format!("shift must be nonzero and finite, got {eta:?}")));
    }
    let mesh = trajectory.mesh();
    let overlap = ShiftOverlap::new(mesh.clone(), eta);
    let mut lhs = Vec::with_capacity(trajectory.steps() + 1);
    let mut bound = Vec::with_capacity(trajectory.steps() + 1);
    let mut ratio = Vec::with_capacity(trajectory.steps() + 1);
    for u in trajectory.snapshots() {
        let l = overlap.translate_sq(u);
        let b = size * (h1_seminorm_sq(mesh, u) + l2_norm_sq(mesh, u));
        lhs.push(l);
        bound.push(b);
        ratio.push(if b > 0.0 {
            l / b
        } else if l == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let max_ratio = ratio.iter().copied().fold(0.0, f64::max);
    Ok(SpaceTranslateReport {
        eta,
        lhs,
        bound,
        ratio,
        max_ratio,
    })
}

/// `int_0^{T - tau} ||phi(t + tau) - phi(t)||^2 dt` with `phi = u^l - M`,
/// where `M` is read with the given convention. Exact: the integrand is a
/// polynomial of degree at most two between consecutive breakpoints.
pub fn translate_integral(
    trajectory: &SpaceTimeField,
    ito: &SpaceTimeField,
    tau: f64,
    convention: ItoConvention,
) -> Result<f64, AnalysisError> {
    let horizon = trajectory.horizon();
    if !(tau > 0.0 && tau < horizon) {
        return Err(AnalysisError::Parameter(format!("shift {tau} outside (0, {horizon})")));
    }
    if !trajectory.same_grid(ito) {
        return Err(crate::error::FieldError::GridMismatch.into());
    }
    let n = trajectory.steps();
    let dt = trajectory.dt();
    let end = horizon - tau;
    let mut breaks: Vec<f64> = vec![0.0, end];
    for k in 0..=n {
        let t = trajectory.time(k);
        if t > 0.0 && t < end {
            breaks.push(t);
        }
        if t - tau > 0.0 && t - tau < end {
            breaks.push(t - tau);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let cells = trajectory.mesh().cells();
    let phi = |s: f64, out: &mut Vec<f64>| {
        let k = ((s / dt).floor() as usize).min(n - 1);
        let u = trajectory.snapshot_values(k);
        let m0 = ito.snapshot_values(k);
        out.clear();
        match convention {
            ItoConvention::Left => out.extend(u.iter().zip(m0).map(|(a, b)| a - b)),
            ItoConvention::Running => {
                let theta = (s - trajectory.time(k)) / dt;
                let m1 = ito.snapshot_values(k + 1);
                out.extend(u.iter().zip(m0.iter().zip(m1)).map(|(a, (b0, b1))| a - (b0 + theta * (b1 - b0))));
            }
        }
    };
    let gauss = GaussLegendre::new(2);
    let (mut early, mut late) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        for (x, wt) in gauss.nodes.iter().zip(&gauss.weights) {
            let s = a + x * (b - a);
            phi(s, &mut early);
            phi(s + tau, &mut late);
            let d: f64 = cells
                .iter()
                .zip(early.iter().zip(&late))
                .map(|(c, (p, q))| c.area * (q - p) * (q - p))
                .sum();
            total += wt * (b - a) * d;
        }
    }
    Ok(total)
}

/// Acceptance thresholds for [`time_translate_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslateSettings {
    /// Largest allowed `max / min` of the ratios estimate / tau.
    pub max_spread: f64,
    pub slope_range: (f64, f64),
}

impl Default for TranslateSettings {
    fn default() -> Self {
        Self {
            max_spread: 3.0,
            slope_range: (0.7, 1.3),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeTranslateReport {
    pub taus: Vec<f64>,
    pub left: Vec<Estimate>,
    pub running: Vec<Estimate>,
    pub left_slope: f64,
    pub running_slope: f64,
    pub left_spread: f64,
    pub running_spread: f64,
    pub left_passed: bool,
    pub running_passed: bool,
}

impl TimeTranslateReport {
    pub fn ratios(&self, convention: ItoConvention) -> Vec<Estimate> {
        let values = match convention {
            ItoConvention::Left => &self.left,
            ItoConvention::Running => &self.running,
        };
        values.iter().zip(&self.taus).map(|(e, t)| e.scaled(1.0 / t)).collect()
    }
}

fn spread(values: &[Estimate], taus: &[f64]) -> f64 {
    let r: Vec<f64> = values.iter().zip(taus).map(|(e, t)| e.mean / t).collect();
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = r.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else {
        max / min
    }
}

/// Monte Carlo time-translate estimates for both stochastic-integral conventions.
#[allow(clippy::too_many_arguments)]
pub fn time_translate_check(
    operator: &TpfaOperator,
    config: &SchemeConfig,
    model: &NoiseModel,
    u0: &CellField,
    samples: usize,
    master_seed: u64,
    taus: &[f64],
    settings: &TranslateSettings,
) -> Result<TimeTranslateReport, AnalysisError> {
    check_samples(samples, 2)?;
    if taus.len() < 2 {
        return Err(AnalysisError::Parameter("need at least two shifts".into()));
    }
    if let Some(bad) = taus.iter().find(|&&t| !(t > 0.0 && t < config.horizon)) {
        return Err(AnalysisError::Parameter(format!("shift {bad} outside (0, {})", config.horizon)));
    }
    let scheme = Scheme::new(operator, *model, *config)?;
    let runs = map_realizations(samples, |r| {
        let path = BrownianPath::sample_realization(master_seed, r as u64, config.steps, config.horizon)
            .map_err(|e| SolverError::Config(e.to_string()))?;
        let traj = scheme.solve_trajectory(&path, u0)?;
        let ito = ito_partial_sums(model, &traj, &path, ItoConvention::Left)?;
        let mut out = Vec::with_capacity(2 * taus.len());
        for convention in [ItoConvention::Left, ItoConvention::Running] {
            for &tau in taus {
                let v = translate_integral(&traj, &ito, tau, convention)
                    .map_err(|e| SolverError::Config(e.to_string()))?;
                out.push(v);
            }
        }
        Ok(out)
    })?;
    let k = taus.len();
    let column = |j: usize| Estimate::from_samples(&runs.iter().map(|r| r[j]).collect::<Vec<_>>());
    let left: Vec<Estimate> = (0..k).map(column).collect();
    let running: Vec<Estimate> = (k..2 * k).map(column).collect();
    let slope = |v: &[Estimate]| {
        if v.iter().all(|e| e.mean > 0.0) {
            log_log_slope(taus, &v.iter().map(|e| e.mean).collect::<Vec<_>>())
        } else {
            f64::NAN
        }
    };
    let (left_slope, running_slope) = (slope(&left), slope(&running));
    let (left_spread, running_spread) = (spread(&left, taus), spread(&running, taus));
    let ok = |s: f64, sp: f64| s >= settings.slope_range.0 && s <= settings.slope_range.1 && sp < settings.max_spread;
    Ok(TimeTranslateReport {
        taus: taus.to_vec(),
        left_passed: ok(left_slope, left_spread),
        running_passed: ok(running_slope, running_spread),
        left,
        running,
        left_slope,
        running_slope,
        left_spread,
        running_spread,
    })
}
