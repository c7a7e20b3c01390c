use std::f64::consts::PI;
use std::sync::Arc;

use super::{check_samples, lp_estimate, map_realizations, Estimate};
use crate::error::{AnalysisError, SolverError};
use crate::field::ReconstructionMode;
use crate::geometry::{self, Point};
use crate::mesh::Mesh;
use crate::noise::{BrownianPath, NoiseModel};
use crate::quadrature::TriangleRule;
use crate::solver::{project_initial, AnalyticInitial, Scheme, SchemeConfig, TpfaOperator};

/// One refinement level: a mesh and a step count on the common horizon.
#[derive(Clone, Debug)]
pub struct LevelSpec {
    pub mesh: Arc<Mesh>,
    pub steps: usize,
}

impl LevelSpec {
    pub fn new(mesh: Arc<Mesh>, steps: usize) -> Self {
        Self { mesh, steps }
    }
}

/// `u(t, x, y) = a e^{-pi^2 (kx^2 + ky^2) t} cos(kx pi x) cos(ky pi y)`, the
/// noise-free solution on the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalSolution {
    pub kx: u32,
    pub ky: u32,
    pub amplitude: f64,
}

impl ModalSolution {
    pub fn cosine(kx: u32, ky: u32, amplitude: f64) -> Self {
        Self { kx, ky, amplitude }
    }

    pub fn rate(&self) -> f64 {
        PI * PI * ((self.kx * self.kx + self.ky * self.ky) as f64)
    }

    pub fn initial(&self) -> AnalyticInitial {
        AnalyticInitial::CosineMode {
            kx: self.kx,
            ky: self.ky,
            amplitude: self.amplitude,
        }
    }

    pub fn eval(&self, t: f64, p: Point) -> f64 {
        (-self.rate() * t).exp() * self.initial().eval(p)
    }

    fn check_domain(&self, mesh: &Mesh) -> Result<(), AnalysisError> {
        let (lo, hi) = geometry::bounding_box(mesh.domain().vertices());
        let unit = lo == Point::new(0.0, 0.0) && hi == Point::new(1.0, 1.0) && mesh.domain_area() == 1.0;
        if !unit {
            return Err(AnalysisError::Parameter(
                "the modal reference solution lives on the unit square".into(),
            ));
        }
        Ok(())
    }

    /// `(int_K phi, int_K phi^2)` per cell for the spatial profile `phi`.
    fn moments(&self, mesh: &Mesh) -> Vec<(f64, f64)> {
        let rule = TriangleRule::collapsed(8);
        let profile = self.initial();
        mesh.cells()
            .iter()
            .map(|c| {
                rule.polygon_nodes(&c.vertices)
                    .into_iter()
                    .fold((0.0, 0.0), |(a, b), (p, w)| {
                        let v = profile.eval(p);
                        (a + w * v, b + w * v * v)
                    })
            })
            .collect()
    }
}

/// `int_{t0}^{t0+dt} e^{-r t} dt`.
fn exp_integral(rate: f64, t0: f64, dt: f64) -> f64 {
    if rate == 0.0 {
        dt
    } else {
        -(-rate * t0).exp() * (-rate * dt).exp_m1() / rate
    }
}

/// `int_{t0}^{t0+dt} int_Lambda |v - u|^2` for a piecewise-constant `v`
/// against the modal solution.
fn modal_interval_error(mesh: &Mesh, moments: &[(f64, f64)], v: &[f64], rate: f64, t0: f64, dt: f64) -> f64 {
    let e1 = exp_integral(rate, t0, dt);
    let e2 = exp_integral(2.0 * rate, t0, dt);
    mesh.cells()
        .iter()
        .zip(moments.iter().zip(v))
        .map(|(c, ((a, b), x))| x * x * c.area * dt - 2.0 * x * a * e1 + b * e2)
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference {
    /// The last level serves as reference for the others.
    Finest,
    /// Every level is compared with a closed-form noise-free solution.
    Modal(ModalSolution),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSettings {
    pub horizon: f64,
    pub samples: usize,
    pub master_seed: u64,
    /// Moments `p` of the `L^p(Omega; L^2(0,T;L^2))` error, each in `[1, 2)`.
    pub exponents: Vec<f64>,
    pub tolerance: f64,
    pub reference: Reference,
}

impl ConvergenceSettings {
    pub fn new(horizon: f64, samples: usize, master_seed: u64) -> Self {
        Self {
            horizon,
            samples,
            master_seed,
            exponents: vec![1.0, 1.9],
            tolerance: crate::solver::DEFAULT_TOLERANCE,
            reference: Reference::Finest,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentError {
    pub p: f64,
    pub left: Estimate,
    pub right: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelError {
    pub h: f64,
    pub steps: usize,
    pub dt: f64,
    pub cells: usize,
    pub errors: Vec<ExponentError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub exponents: Vec<f64>,
    /// Compared levels, coarse to fine.
    pub levels: Vec<LevelError>,
    pub reference: Reference,
    pub samples: usize,
}

impl ConvergenceReport {
    pub fn error(&self, level: usize, exponent: usize, mode: ReconstructionMode) -> Estimate {
        let e = &self.levels[level].errors[exponent];
        match mode {
            ReconstructionMode::Right => e.right,
            _ => e.left,
        }
    }

    fn orders(&self, exponent: usize, mode: ReconstructionMode, scale: impl Fn(&LevelError) -> f64) -> Vec<Option<f64>> {
        self.levels
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let ratio = scale(&w[0]) / scale(&w[1]);
                let (a, b) = (self.error(i, exponent, mode).mean, self.error(i + 1, exponent, mode).mean);
                if ratio > 1.0 + 1e-12 && a > 0.0 && b > 0.0 {
                    Some((a / b).ln() / ratio.ln())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Empirical orders with respect to the mesh size between consecutive levels.
    pub fn orders_in_h(&self, exponent: usize, mode: ReconstructionMode) -> Vec<Option<f64>> {
        self.orders(exponent, mode, |l| l.h)
    }

    /// Empirical orders with respect to the time step between consecutive levels.
    pub fn orders_in_dt(&self, exponent: usize, mode: ReconstructionMode) -> Vec<Option<f64>> {
        self.orders(exponent, mode, |l| l.dt)
    }

    /// Whether the mean errors strictly decrease from level to level.
    pub fn is_monotone(&self, exponent: usize, mode: ReconstructionMode) -> bool {
        (1..self.levels.len())
            .all(|i| self.error(i, exponent, mode).mean < self.error(i - 1, exponent, mode).mean)
    }

    /// CSV with one row per level and exponent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h,steps,dt,cells,p,error_left,se_left,error_right,se_right\n");
        for (i, l) in self.levels.iter().enumerate() {
            for e in &l.errors {
                out.push_str(&format!(
                    "{i},{:.16e},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    l.h, l.steps, l.dt, l.cells, e.p, e.left.mean, e.left.std_err, e.right.mean, e.right.std_err
                ));
            }
        }
        out
    }
}

/// For every cell of `fine`, the cell of `coarse` that contains it.
fn parent_map(coarse: &Mesh, fine: &Mesh) -> Result<Vec<usize>, AnalysisError> {
    let tol = 1e-9 * coarse.size();
    fine.cells()
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let parent = coarse
                .locate(cell.center, tol)
                .filter(|&p| {
                    let poly = &coarse.cells()[p].vertices;
                    cell.vertices.iter().all(|&v| geometry::convex_contains(poly, v, tol))
                })
                .ok_or_else(|| AnalysisError::NonNested(format!("fine cell {k} is not inside a coarse cell")))?;
            Ok(parent)
        })
        .collect()
}

fn validate_levels(levels: &[LevelSpec]) -> Result<Vec<Vec<usize>>, AnalysisError> {
    let finest = levels.last().ok_or_else(|| AnalysisError::Parameter("no levels".into()))?;
    for (i, w) in levels.windows(2).enumerate() {
        if w[1].steps < w[0].steps || w[1].steps % w[0].steps != 0 {
            return Err(AnalysisError::NonNested(format!(
                "level {} has {} steps, level {i} has {}",
                i + 1,
                w[1].steps,
                w[0].steps
            )));
        }
        if w[1].mesh.size() > w[0].mesh.size() * (1.0 + 1e-12) {
            return Err(AnalysisError::NonNested(format!("level {} is coarser than level {i}", i + 1)));
        }
    }
    if levels.iter().any(|l| l.steps == 0) {
        return Err(AnalysisError::Parameter("step counts must be positive".into()));
    }
    levels.iter().map(|l| parent_map(&l.mesh, &finest.mesh)).collect()
}

/// Strong errors of each level on shared Brownian paths: every level uses the
/// finest path coarsened to its own step, and coarse fields are compared on the
/// finest mesh by injection.
pub fn convergence_study(
    levels: &[LevelSpec],
    model: &NoiseModel,
    u0: &(dyn Fn(Point) -> f64 + Sync),
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport, AnalysisError> {
    check_samples(settings.samples, if model.is_zero() { 1 } else { 2 })?;
    if let Some(p) = settings.exponents.iter().find(|p| !(**p >= 1.0 && **p < 2.0)) {
        return Err(AnalysisError::Parameter(format!("exponent {p} outside [1, 2)")));
    }
    if settings.exponents.is_empty() {
        return Err(AnalysisError::Parameter("no exponents".into()));
    }
    let parents = validate_levels(levels)?;
    let modal = match settings.reference {
        Reference::Finest => {
            if levels.len() < 2 {
                return Err(AnalysisError::Parameter("need a coarse level and a reference".into()));
            }
            None
        }
        Reference::Modal(m) => {
            if !model.is_zero() {
                return Err(AnalysisError::Parameter("the modal reference requires g = 0".into()));
            }
            m.check_domain(&levels[0].mesh)?;
            Some(m)
        }
    };
    let horizon = settings.horizon;
    let operators = levels
        .iter()
        .map(|l| TpfaOperator::assemble(l.mesh.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let configs = levels
        .iter()
        .map(|l| SchemeConfig::new(horizon, l.steps)?.with_tolerance(settings.tolerance))
        .collect::<Result<Vec<_>, _>>()?;
    let schemes = operators
        .iter()
        .zip(&configs)
        .map(|(op, cfg)| Scheme::new(op, *model, *cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let initials = levels
        .iter()
        .map(|l| project_initial(u0, l.mesh.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let moments: Vec<Vec<(f64, f64)>> = match modal {
        Some(m) => levels.iter().map(|l| m.moments(&l.mesh)).collect(),
        None => Vec::new(),
    };
    let fine_steps = levels.last().map(|l| l.steps).unwrap_or(1);
    let fine_mesh = &levels[levels.len() - 1].mesh;
    let compared = if modal.is_some() { levels.len() } else { levels.len() - 1 };

    // per realization: (left, right) L^2(0,T;L^2) errors of each compared level
    let runs = map_realizations(settings.samples, |r| {
        let path = BrownianPath::sample_realization(settings.master_seed, r as u64, fine_steps, horizon)
            .map_err(|e| SolverError::Config(e.to_string()))?;
        let coarse_path = |i: usize| {
            path.coarsen(fine_steps / levels[i].steps)
                .map_err(|e| SolverError::Config(e.to_string()))
        };
        let mut out = Vec::with_capacity(compared);
        if let Some(m) = modal {
            for i in 0..levels.len() {
                let dt = configs[i].dt();
                let mesh = &levels[i].mesh;
                let (mut left, mut right) = (0.0, 0.0);
                let mut prev = Vec::new();
                schemes[i].for_each_snapshot(&coarse_path(i)?, initials[i].values(), |n, u| {
                    if n > 0 {
                        let t0 = (n - 1) as f64 * dt;
                        left += modal_interval_error(mesh, &moments[i], &prev, m.rate(), t0, dt);
                        right += modal_interval_error(mesh, &moments[i], u, m.rate(), t0, dt);
                    }
                    prev.clear();
                    prev.extend_from_slice(u);
                })?;
                out.push((left.max(0.0).sqrt(), right.max(0.0).sqrt()));
            }
            return Ok(out);
        }
        let coarse: Vec<_> = (0..compared)
            .map(|i| schemes[i].solve_trajectory(&coarse_path(i)?, &initials[i]))
            .collect::<Result<_, _>>()?;
        let last = levels.len() - 1;
        let dt = configs[last].dt();
        let mut acc = vec![(0.0, 0.0); compared];
        let mut prev = Vec::new();
        schemes[last].for_each_snapshot(&path, initials[last].values(), |n, u| {
            if n > 0 {
                let j = n - 1;
                for (i, traj) in coarse.iter().enumerate() {
                    let c = j / (fine_steps / levels[i].steps);
                    let (cl, cr) = (traj.snapshot_values(c), traj.snapshot_values(c + 1));
                    let (mut el, mut er) = (0.0, 0.0);
                    for (k, cell) in fine_mesh.cells().iter().enumerate() {
                        let p = parents[i][k];
                        el += cell.area * (cl[p] - prev[k]) * (cl[p] - prev[k]);
                        er += cell.area * (cr[p] - u[k]) * (cr[p] - u[k]);
                    }
                    acc[i].0 += dt * el;
                    acc[i].1 += dt * er;
                }
            }
            prev.clear();
            prev.extend_from_slice(u);
        })?;
        out.extend(acc.into_iter().map(|(l, r)| (l.sqrt(), r.sqrt())));
        Ok(out)
    })?;

    let level_errors = (0..compared)
        .map(|i| {
            let left: Vec<f64> = runs.iter().map(|r| r[i].0).collect();
            let right: Vec<f64> = runs.iter().map(|r| r[i].1).collect();
            LevelError {
                h: levels[i].mesh.size(),
                steps: levels[i].steps,
                dt: configs[i].dt(),
                cells: levels[i].mesh.num_cells(),
                errors: settings
                    .exponents
                    .iter()
                    .map(|&p| ExponentError {
                        p,
                        left: lp_estimate(&left, p),
                        right: lp_estimate(&right, p),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(ConvergenceReport {
        exponents: settings.exponents.clone(),
        levels: level_errors,
        reference: settings.reference,
        samples: settings.samples,
    })
}
