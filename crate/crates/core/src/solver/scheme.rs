use std::sync::Arc;

use super::cg::{conjugate_gradient, CgOutcome, CgWorkspace, ShiftedSystem};
use super::tpfa::TpfaOperator;
use crate::error::SolverError;
use crate::field::{CellField, ReconstructionMode, SpaceTimeField};
use crate::noise::{BrownianPath, NoiseModel};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Time grid and linear-solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub tolerance: f64,
    /// Defaults to ten times the cell count.
    pub max_iterations: Option<usize>,
}

impl SchemeConfig {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, SolverError> {
        let config = Self {
            horizon,
            steps,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self, SolverError> {
        self.tolerance = tolerance;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SolverError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(SolverError::Config("step count must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(SolverError::Config(format!(
                "solver tolerance must lie in (0, 1e-4], got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(SolverError::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn max_iterations_for(&self, cells: usize) -> usize {
        self.max_iterations.unwrap_or(10 * cells.max(1))
    }
}

/// One semi-implicit step `(M + dt A) u^{n+1} = M (u^n + g(u^n) dW)`, with
/// cached preconditioner and buffers.
#[derive(Debug)]
pub struct Scheme<'a> {
    operator: &'a TpfaOperator,
    model: NoiseModel,
    config: SchemeConfig,
    inv_diag: Vec<f64>,
}

impl<'a> Scheme<'a> {
    pub fn new(operator: &'a TpfaOperator, model: NoiseModel, config: SchemeConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let system = ShiftedSystem {
            operator,
            dt: config.dt(),
        };
        let inv_diag = crate::solver::cg::SpdOperator::diagonal(&system)
            .iter()
            .map(|d| 1.0 / d)
            .collect();
        Ok(Self {
            operator,
            model,
            config,
            inv_diag,
        })
    }

    pub fn operator(&self) -> &TpfaOperator {
        self.operator
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// Advances `u` in place; `forcing` receives `g(u^n) dW`.
    pub fn advance(
        &self,
        u: &mut [f64],
        dw: f64,
        forcing: &mut Vec<f64>,
        rhs: &mut Vec<f64>,
        work: &mut CgWorkspace,
    ) -> Result<CgOutcome, SolverError> {
        if !dw.is_finite() {
            return Err(SolverError::Config(format!("Brownian increment {dw} is not finite")));
        }
        let mass = self.operator.mass();
        let n = mass.len();
        if u.len() != n {
            return Err(SolverError::Dimension { matrix: n, vector: u.len() });
        }
        forcing.clear();
        forcing.extend(u.iter().map(|&x| self.model.g(x) * dw));
        rhs.clear();
        for k in 0..n {
            u[k] += forcing[k];
            rhs.push(mass[k] * u[k]);
        }
        let system = ShiftedSystem {
            operator: self.operator,
            dt: self.config.dt(),
        };
        let outcome = conjugate_gradient(
            &system,
            &self.inv_diag,
            rhs,
            u,
            self.config.tolerance,
            self.config.max_iterations_for(n),
            work,
        )?;
        // constants are in the kernel of A: restore the exact discrete mass
        let target: f64 = rhs.iter().sum();
        let current: f64 = mass.iter().zip(u.iter()).map(|(m, x)| m * x).sum();
        if target != current {
            let total: f64 = mass.iter().sum();
            let shift = (target - current) / total;
            u.iter_mut().for_each(|x| *x += shift);
        }
        Ok(outcome)
    }

    pub fn step(&self, u: &CellField, dw: f64) -> Result<CellField, SolverError> {
        if !Arc::ptr_eq(u.mesh(), self.operator.mesh()) && **u.mesh() != **self.operator.mesh() {
            return Err(crate::error::FieldError::MeshMismatch.into());
        }
        let mut values = u.values().to_vec();
        self.advance(&mut values, dw, &mut Vec::new(), &mut Vec::new(), &mut CgWorkspace::default())?;
        Ok(CellField::from_trusted(u.mesh().clone(), values))
    }

    fn check_path(&self, path: &BrownianPath) -> Result<(), SolverError> {
        if path.steps() != self.config.steps || path.horizon() != self.config.horizon {
            return Err(SolverError::PathMismatch {
                path_steps: path.steps(),
                path_horizon: path.horizon(),
                steps: self.config.steps,
                horizon: self.config.horizon,
            });
        }
        Ok(())
    }

    /// Runs the recursion along `path`, calling `visit(n, u^n)` for `n = 0..=N`.
    pub fn for_each_snapshot(
        &self,
        path: &BrownianPath,
        u0: &[f64],
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<(), SolverError> {
        self.check_path(path)?;
        let mut u = u0.to_vec();
        let (mut forcing, mut rhs, mut work) = (Vec::new(), Vec::new(), CgWorkspace::default());
        visit(0, &u);
        for (n, &dw) in path.increments().iter().enumerate() {
            self.advance(&mut u, dw, &mut forcing, &mut rhs, &mut work)?;
            visit(n + 1, &u);
        }
        Ok(())
    }

    pub fn solve_trajectory(&self, path: &BrownianPath, u0: &CellField) -> Result<SpaceTimeField, SolverError> {
        if !Arc::ptr_eq(u0.mesh(), self.operator.mesh()) && **u0.mesh() != **self.operator.mesh() {
            return Err(crate::error::FieldError::MeshMismatch.into());
        }
        let mut snapshots = Vec::with_capacity(self.config.steps + 1);
        self.for_each_snapshot(path, u0.values(), |_, u| snapshots.push(u.to_vec()))?;
        Ok(SpaceTimeField::from_trusted(
            self.operator.mesh().clone(),
            self.config.horizon,
            snapshots,
        ))
    }
}

/// One step of the scheme.
pub fn step(
    operator: &TpfaOperator,
    u: &CellField,
    model: &NoiseModel,
    dw: f64,
    config: &SchemeConfig,
) -> Result<CellField, SolverError> {
    Scheme::new(operator, *model, *config)?.step(u, dw)
}

pub fn solve_trajectory(
    operator: &TpfaOperator,
    config: &SchemeConfig,
    model: &NoiseModel,
    path: &BrownianPath,
    u0: &CellField,
) -> Result<SpaceTimeField, SolverError> {
    Scheme::new(operator, *model, *config)?.solve_trajectory(path, u0)
}

/// How the discrete stochastic integral is read between grid times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ItoConvention {
    /// Piecewise constant: the value accumulated through `t_n` on `[t_n, t_{n+1})`.
    Left,
    /// Continuous in time: linear between the grid values.
    Running,
}

impl ItoConvention {
    pub fn reconstruction(self) -> ReconstructionMode {
        match self {
            Self::Left => ReconstructionMode::Left,
            Self::Running => ReconstructionMode::Affine,
        }
    }
}

/// Snapshot `n` holds `sum_{k < n} g(u^k) Delta_{k+1} W`; the convention only
/// changes how the result is meant to be reconstructed, see
/// [`ItoConvention::reconstruction`].
pub fn ito_partial_sums(
    model: &NoiseModel,
    trajectory: &SpaceTimeField,
    path: &BrownianPath,
    _convention: ItoConvention,
) -> Result<SpaceTimeField, SolverError> {
    if path.steps() != trajectory.steps() || path.horizon() != trajectory.horizon() {
        return Err(SolverError::PathMismatch {
            path_steps: path.steps(),
            path_horizon: path.horizon(),
            steps: trajectory.steps(),
            horizon: trajectory.horizon(),
        });
    }
    let cells = trajectory.mesh().num_cells();
    let mut acc = vec![0.0; cells];
    let mut snapshots = Vec::with_capacity(trajectory.steps() + 1);
    snapshots.push(acc.clone());
    for (n, &dw) in path.increments().iter().enumerate() {
        for (a, &u) in acc.iter_mut().zip(trajectory.snapshot_values(n)) {
            *a += model.g(u) * dw;
        }
        snapshots.push(acc.clone());
    }
    Ok(SpaceTimeField::from_trusted(
        trajectory.mesh().clone(),
        trajectory.horizon(),
        snapshots,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_rect, build_voronoi, jittered_lattice_sites, Domain, Mesh};
    use crate::noise::NoiseKind;
    use proptest::prelude::*;

    fn uniform(nx: usize, ny: usize, d: Domain) -> (Arc<Mesh>, TpfaOperator) {
        let mesh = Arc::new(build_uniform_rect(nx, ny, &d).unwrap());
        let op = TpfaOperator::assemble(mesh.clone()).unwrap();
        (mesh, op)
    }

    fn linear(lambda: f64) -> NoiseModel {
        NoiseModel::new(NoiseKind::Linear { lambda }).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::new(0.0, 4).is_err());
        assert!(SchemeConfig::new(1.0, 0).is_err());
        let c = SchemeConfig::new(1.0, 4).unwrap();
        assert_eq!(c.tolerance, 1e-10);
        assert_eq!(c.max_iterations_for(25), 250);
        assert!(c.with_tolerance(1e-3).is_err());
        assert!(c.with_tolerance(0.0).is_err());
        assert!(c.with_tolerance(1e-4).is_ok());
    }

    #[test]
    fn constant_state_without_noise_is_fixed_exactly() {
        let (mesh, op) = uniform(4, 3, Domain::unit_square());
        let u = CellField::constant(mesh, 2.5).unwrap();
        let cfg = SchemeConfig::new(1.0, 8).unwrap();
        let next = step(&op, &u, &NoiseModel::zero(), 0.3, &cfg).unwrap();
        assert!(next.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn single_cell_reduces_to_euler_maruyama() {
        let (mesh, op) = uniform(1, 1, Domain::unit_square());
        let u = CellField::new(mesh, vec![1.5]).unwrap();
        let cfg = SchemeConfig::new(1.0, 4).unwrap();
        let model = linear(0.8);
        let next = step(&op, &u, &model, -0.25, &cfg).unwrap();
        assert_eq!(next.values(), &[1.5 + 0.8 * 1.5 * -0.25]);
    }

    #[test]
    fn two_cell_dense_example() {
        let (mesh, op) = uniform(2, 1, Domain::rectangle(0.0, 2.0, 0.0, 1.0).unwrap());
        let u = CellField::new(mesh, vec![0.0, 2.0]).unwrap();
        let cfg = SchemeConfig::new(1.0, 1).unwrap();
        let next = step(&op, &u, &NoiseModel::zero(), 0.0, &cfg).unwrap();
        assert!((next.values()[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((next.values()[1] - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn trajectory_shape_and_composition() {
        let (mesh, op) = uniform(3, 3, Domain::unit_square());
        let u0 = CellField::new(mesh.clone(), (0..9).map(|k| k as f64).collect()).unwrap();
        let model = NoiseModel::new(NoiseKind::Sine { sigma0: 0.5, omega: 1.0 }).unwrap();
        let cfg = SchemeConfig::new(0.5, 1).unwrap();
        let path = BrownianPath::sample(3, 1, 0.5).unwrap();
        let traj = solve_trajectory(&op, &cfg, &model, &path, &u0).unwrap();
        assert_eq!(traj.steps(), 1);
        assert_eq!(traj.snapshot(0), u0);
        let single = step(&op, &u0, &model, path.increments()[0], &cfg).unwrap();
        assert_eq!(traj.snapshot(1), single);

        let wrong = BrownianPath::sample(3, 2, 0.5).unwrap();
        assert!(matches!(
            solve_trajectory(&op, &cfg, &model, &wrong, &u0),
            Err(SolverError::PathMismatch { .. })
        ));
    }

    #[test]
    fn zero_noise_constant_trajectory() {
        let (mesh, op) = uniform(5, 5, Domain::unit_square());
        let u0 = CellField::constant(mesh, -1.25).unwrap();
        let cfg = SchemeConfig::new(2.0, 10).unwrap();
        let path = BrownianPath::sample(1, 10, 2.0).unwrap();
        let traj = solve_trajectory(&op, &cfg, &NoiseModel::zero(), &path, &u0).unwrap();
        assert!(traj.snapshots().iter().all(|s| s.iter().all(|&v| v == -1.25)));
    }

    #[test]
    fn mass_balance_with_sine_noise() {
        let (mesh, op) = uniform(8, 8, Domain::unit_square());
        let u0 = CellField::new(mesh.clone(), (0..64).map(|k| ((k * 7) % 11) as f64 - 5.0).collect()).unwrap();
        let model = NoiseModel::new(NoiseKind::Sine { sigma0: 1.0, omega: 2.0 }).unwrap();
        let cfg = SchemeConfig::new(1.0, 32).unwrap();
        let path = BrownianPath::sample(17, 32, 1.0).unwrap();
        let traj = solve_trajectory(&op, &cfg, &model, &path, &u0).unwrap();
        for n in 0..32 {
            let before = traj.snapshot(n);
            let after = traj.snapshot(n + 1);
            let noise = model.eval_g(&before).scaled(path.increments()[n]);
            let defect = after.integral() - before.integral() - noise.integral();
            assert!(defect.abs() <= 1e-12 * (1.0 + before.l2_norm()), "step {n}: {defect}");
        }
    }

    #[test]
    fn stability_without_noise_for_any_step() {
        let (mesh, op) = uniform(6, 6, Domain::unit_square());
        let u0 = CellField::new(mesh, (0..36).map(|k| (k as f64 * 1.3).cos()).collect()).unwrap();
        for dt_steps in [1usize, 3, 50] {
            let cfg = SchemeConfig::new(100.0, dt_steps).unwrap();
            let path = BrownianPath::sample(0, dt_steps, 100.0).unwrap();
            let traj = solve_trajectory(&op, &cfg, &NoiseModel::zero(), &path, &u0).unwrap();
            for n in 0..dt_steps {
                assert!(traj.snapshot(n + 1).l2_norm() <= traj.snapshot(n).l2_norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ito_sums_examples() {
        let (mesh, op) = uniform(2, 2, Domain::unit_square());
        let path = BrownianPath::sample(8, 6, 1.0).unwrap();
        let cfg = SchemeConfig::new(1.0, 6).unwrap();
        let u0 = CellField::constant(mesh.clone(), 1.0).unwrap();

        let zero = solve_trajectory(&op, &cfg, &NoiseModel::zero(), &path, &u0).unwrap();
        let m = ito_partial_sums(&NoiseModel::zero(), &zero, &path, ItoConvention::Left).unwrap();
        assert!(m.snapshots().iter().all(|s| s.iter().all(|&v| v == 0.0)));

        let additive = NoiseModel::new(NoiseKind::Additive { sigma0: 0.5 }).unwrap();
        let traj = solve_trajectory(&op, &cfg, &additive, &path, &u0).unwrap();
        let m = ito_partial_sums(&additive, &traj, &path, ItoConvention::Running).unwrap();
        for (n, w) in path.values().iter().enumerate() {
            for &v in m.snapshot_values(n) {
                assert!((v - 0.5 * w).abs() < 1e-15);
            }
        }

        let one_step = BrownianPath::sample(8, 1, 1.0).unwrap();
        let cfg1 = SchemeConfig::new(1.0, 1).unwrap();
        let u = CellField::constant(mesh, 3.0).unwrap();
        let traj = solve_trajectory(&op, &cfg1, &linear(1.0), &one_step, &u).unwrap();
        let m = ito_partial_sums(&linear(1.0), &traj, &one_step, ItoConvention::Left).unwrap();
        assert!(m.snapshot_values(1).iter().all(|&v| v == 3.0 * one_step.increments()[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn linear_noise_superposition(seed in 0u64..1000, a in proptest::collection::vec(-1.0..1.0f64, 12), b in proptest::collection::vec(-1.0..1.0f64, 12), c in -3.0..3.0f64) {
            let d = Domain::unit_square();
            let mesh = Arc::new(build_voronoi(&jittered_lattice_sites(4, 3, &d, 0.5, seed), &d).unwrap());
            let op = TpfaOperator::assemble(mesh.clone()).unwrap();
            let cfg = SchemeConfig::new(1.0, 8).unwrap().with_tolerance(1e-14).unwrap();
            let model = linear(0.7);
            let path = BrownianPath::sample(seed, 8, 1.0).unwrap();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + c * y).collect();
            let run = |v: Vec<f64>| solve_trajectory(&op, &cfg, &model, &path, &CellField::new(mesh.clone(), v).unwrap()).unwrap();
            let (ta, tb, tc) = (run(a), run(b), run(combo));
            for n in 0..=8 {
                for k in 0..12 {
                    let expect = ta.snapshot_values(n)[k] + c * tb.snapshot_values(n)[k];
                    let got = tc.snapshot_values(n)[k];
                    prop_assert!((got - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
                }
            }
        }

        #[test]
        fn step_commutes_with_cell_permutation(seed in 0u64..1000, dw in -0.5..0.5f64) {
            let d = Domain::unit_square();
            let sites = jittered_lattice_sites(3, 3, &d, 0.6, seed);
            let mut reversed = sites.clone();
            reversed.reverse();
            let m1 = Arc::new(build_voronoi(&sites, &d).unwrap());
            let m2 = Arc::new(build_voronoi(&reversed, &d).unwrap());
            let o1 = TpfaOperator::assemble(m1.clone()).unwrap();
            let o2 = TpfaOperator::assemble(m2.clone()).unwrap();
            let cfg = SchemeConfig::new(0.1, 1).unwrap().with_tolerance(1e-14).unwrap();
            let model = NoiseModel::new(NoiseKind::Sine { sigma0: 1.0, omega: 1.0 }).unwrap();
            let values: Vec<f64> = (0..9).map(|k| (k as f64 + seed as f64).sin()).collect();
            let mut rev = values.clone();
            rev.reverse();
            let s1 = step(&o1, &CellField::new(m1, values).unwrap(), &model, dw, &cfg).unwrap();
            let s2 = step(&o2, &CellField::new(m2, rev).unwrap(), &model, dw, &cfg).unwrap();
            for k in 0..9 {
                prop_assert!((s1.values()[k] - s2.values()[8 - k]).abs() < 1e-12);
            }
        }
    }
}
