//! Piecewise-constant cell fields, their time trajectories and the discrete
//! norms built on the two-point geometry.

mod gagliardo;

use std::sync::Arc;

use crate::error::FieldError;
use crate::geometry::Point;
use crate::mesh::Mesh;

pub use gagliardo::{interval_kernel, GagliardoWeights, MAX_GAGLIARDO_CELLS};

/// One value per cell of a shared mesh.
#[derive(Clone, Debug)]
pub struct CellField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

fn check_values(mesh: &Mesh, values: &[f64]) -> Result<(), FieldError> {
    if values.len() != mesh.num_cells() {
        return Err(FieldError::Length {
            expected: mesh.num_cells(),
            got: values.len(),
        });
    }
    if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(FieldError::NonFinite { cell, value });
    }
    Ok(())
}

fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl PartialEq for CellField {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && same_mesh(&self.mesh, &other.mesh)
    }
}

impl CellField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, FieldError> {
        check_values(&mesh, &values)?;
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Result<Self, FieldError> {
        let n = mesh.num_cells();
        Self::new(mesh, vec![c; n])
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_cells();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub(crate) fn from_trusted(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.num_cells());
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_mesh(&self, other: &CellField) -> bool {
        same_mesh(&self.mesh, &other.mesh)
    }

    fn require_same_mesh(&self, other: &CellField) -> Result<(), FieldError> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(FieldError::MeshMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> CellField {
        Self::from_trusted(self.mesh.clone(), self.values.iter().map(|v| c * v).collect())
    }

    /// `self - other`.
    pub fn difference(&self, other: &CellField) -> Result<CellField, FieldError> {
        self.require_same_mesh(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_trusted(self.mesh.clone(), values))
    }

    /// `sum_K m_K w_K`.
    pub fn integral(&self) -> f64 {
        integral(&self.mesh, &self.values)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        l2_norm_sq(&self.mesh, &self.values)
    }

    /// `(sum_K m_K |w_K|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Edge-indexed gradient, interior edges first (in mesh order) then
    /// boundary edges, which carry zero.
    pub fn discrete_gradient(&self) -> Vec<Point> {
        let mesh = &*self.mesh;
        let mut grad: Vec<Point> = mesh
            .interior_edges()
            .iter()
            .map(|e| {
                let [k, l] = e.cells;
                e.normal * (2.0 * (self.values[l] - self.values[k]) / e.distance)
            })
            .collect();
        grad.resize(mesh.num_edges(), Point::default());
        grad
    }

    /// `sum_sigma m_{D_sigma} |grad_sigma w|^2`; boundary diamonds carry no gradient.
    pub fn gradient_l2_sq(&self) -> f64 {
        self.discrete_gradient()
            .iter()
            .zip(self.mesh.interior_edges())
            .map(|(g, e)| e.diamond_area * g.dot(*g))
            .sum()
    }

    pub fn h1_seminorm_sq(&self) -> f64 {
        h1_seminorm_sq(&self.mesh, &self.values)
    }

    /// `(sum_{K|L} m_sigma / d_{K|L} |w_K - w_L|^2)^{1/2}`.
    pub fn h1_seminorm(&self) -> f64 {
        self.h1_seminorm_sq().sqrt()
    }

    /// Squared fractional seminorm `sum_{K != L} |w_K - w_L|^2 int_K int_L |x - y|^{-2-2 alpha}`.
    pub fn gagliardo_space_seminorm_sq(&self, alpha: f64) -> Result<f64, FieldError> {
        let weights = GagliardoWeights::new(&self.mesh, alpha)?;
        Ok(weights.seminorm_sq(&self.values))
    }
}

pub(crate) fn integral(mesh: &Mesh, values: &[f64]) -> f64 {
    mesh.cells().iter().zip(values).map(|(c, v)| c.area * v).sum()
}

pub(crate) fn l2_norm_sq(mesh: &Mesh, values: &[f64]) -> f64 {
    mesh.cells().iter().zip(values).map(|(c, v)| c.area * v * v).sum()
}

pub(crate) fn h1_seminorm_sq(mesh: &Mesh, values: &[f64]) -> f64 {
    mesh.interior_edges()
        .iter()
        .map(|e| {
            let d = values[e.cells[0]] - values[e.cells[1]];
            e.transmissibility() * d * d
        })
        .sum()
}

/// `lhs - rhs` of the discrete partial integration identity
/// `sum_K sum_{sigma in E_K int} tau_sigma (w_K - w_L) v_K = sum_{K|L} tau_sigma (w_K - w_L)(v_K - v_L)`.
pub fn discrete_partial_integration_residual(w: &CellField, v: &CellField) -> Result<f64, FieldError> {
    w.require_same_mesh(v)?;
    let mesh = &*w.mesh;
    let (wv, vv) = (&w.values, &v.values);
    let mut lhs = 0.0;
    for (k, &vk) in vv.iter().enumerate() {
        for &edge in mesh.cell_edges(k) {
            if let crate::mesh::EdgeRef::Interior(i) = edge {
                let e = &mesh.interior_edges()[i];
                let l = if e.cells[0] == k { e.cells[1] } else { e.cells[0] };
                lhs += e.transmissibility() * (wv[k] - wv[l]) * vk;
            }
        }
    }
    let rhs: f64 = mesh
        .interior_edges()
        .iter()
        .map(|e| {
            let [k, l] = e.cells;
            e.transmissibility() * (wv[k] - wv[l]) * (vv[k] - vv[l])
        })
        .sum();
    Ok(lhs - rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReconstructionMode {
    /// Snapshot `n` on `[t_n, t_{n+1})`, snapshot 0 at `t = 0` and `N - 1` at `t = T`.
    Left,
    /// Snapshot `n + 1` on `[t_n, t_{n+1})` and snapshot `N` at `t = T`.
    Right,
    /// Continuous, linear between consecutive snapshots.
    Affine,
}

/// Snapshots `0..=N` on the uniform grid `t_n = n T / N`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    mesh: Arc<Mesh>,
    horizon: f64,
    snapshots: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(mesh: Arc<Mesh>, horizon: f64, snapshots: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        if snapshots.len() < 2 {
            return Err(FieldError::TooFewSteps {
                needed: 1,
                got: snapshots.len().saturating_sub(1),
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(FieldError::TimeOutOfRange { t: horizon, horizon });
        }
        for s in &snapshots {
            check_values(&mesh, s)?;
        }
        Ok(Self {
            mesh,
            horizon,
            snapshots,
        })
    }

    pub(crate) fn from_trusted(mesh: Arc<Mesh>, horizon: f64, snapshots: Vec<Vec<f64>>) -> Self {
        Self {
            mesh,
            horizon,
            snapshots,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.horizon * n as f64 / self.steps() as f64
    }

    pub fn snapshot_values(&self, n: usize) -> &[f64] {
        &self.snapshots[n]
    }

    pub fn snapshot(&self, n: usize) -> CellField {
        CellField::from_trusted(self.mesh.clone(), self.snapshots[n].clone())
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.snapshots
    }

    pub fn same_grid(&self, other: &SpaceTimeField) -> bool {
        self.steps() == other.steps() && self.horizon == other.horizon && same_mesh(&self.mesh, &other.mesh)
    }

    /// Index `n` with `t in [t_n, t_{n+1})`, clamped to `N - 1` at `t = T`.
    fn interval(&self, t: f64) -> Result<usize, FieldError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(FieldError::TimeOutOfRange { t, horizon: self.horizon });
        }
        let n = self.steps();
        let mut k = ((t / self.horizon) * n as f64).floor() as usize;
        k = k.min(n - 1);
        // guard floor rounding against the exact grid times
        if k + 1 < n && self.time(k + 1) <= t {
            k += 1;
        }
        if k > 0 && self.time(k) > t {
            k -= 1;
        }
        Ok(k)
    }

    pub fn reconstruct(&self, mode: ReconstructionMode, t: f64) -> Result<CellField, FieldError> {
        let n = self.interval(t)?;
        let values = match mode {
            ReconstructionMode::Left => self.snapshots[n].clone(),
            ReconstructionMode::Right => self.snapshots[n + 1].clone(),
            ReconstructionMode::Affine => {
                let theta = (t - self.time(n)) / self.dt();
                if theta == 0.0 {
                    self.snapshots[n].clone()
                } else if t == self.horizon {
                    self.snapshots[n + 1].clone()
                } else {
                    self.snapshots[n]
                        .iter()
                        .zip(&self.snapshots[n + 1])
                        .map(|(a, b)| a + theta * (b - a))
                        .collect()
                }
            }
        };
        Ok(CellField::from_trusted(self.mesh.clone(), values))
    }

    /// Snapshot indices backing the piecewise-constant reconstruction on the
    /// intervals `0..N`.
    pub(crate) fn piecewise_indices(&self, mode: ReconstructionMode) -> Result<std::ops::Range<usize>, FieldError> {
        let n = self.steps();
        match mode {
            ReconstructionMode::Left => Ok(0..n),
            ReconstructionMode::Right => Ok(1..n + 1),
            ReconstructionMode::Affine => Err(FieldError::NotPiecewiseConstant),
        }
    }

    /// `int_0^T ||w(t)||^2 dt` of the chosen reconstruction.
    pub fn l2_space_time_sq(&self, mode: ReconstructionMode) -> f64 {
        let dt = self.dt();
        match self.piecewise_indices(mode) {
            Ok(range) => range.map(|n| dt * l2_norm_sq(&self.mesh, &self.snapshots[n])).sum(),
            Err(_) => self
                .snapshots
                .windows(2)
                .map(|w| {
                    // int_0^1 |a + s (b - a)|^2 ds = (a^2 + a b + b^2) / 3
                    let mixed: f64 = self
                        .mesh
                        .cells()
                        .iter()
                        .zip(w[0].iter().zip(&w[1]))
                        .map(|(c, (a, b))| c.area * (a * a + a * b + b * b) / 3.0)
                        .sum();
                    dt * mixed
                })
                .sum(),
        }
    }

    /// Squared fractional time seminorm
    /// `int_0^T int_0^T ||w(s) - w(t)||^2 |t - s|^{-1-2 alpha} ds dt` of the
    /// left or right reconstruction, integrated exactly per pair of time cells.
    pub fn gagliardo_time_seminorm_sq(&self, alpha: f64, mode: ReconstructionMode) -> Result<f64, FieldError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(FieldError::Order(alpha));
        }
        let n = self.steps();
        if n < 2 {
            return Err(FieldError::TooFewSteps { needed: 2, got: n });
        }
        let offset = self.piecewise_indices(mode)?.start;
        let dt = self.dt();
        // the kernel integral only depends on the gap between the two intervals
        let kernel: Vec<f64> = (1..n).map(|gap| interval_kernel(alpha, dt, gap)).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let a = &self.snapshots[offset + i];
                let b = &self.snapshots[offset + j];
                let dist: f64 = self
                    .mesh
                    .cells()
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(c, (x, y))| c.area * (x - y) * (x - y))
                    .sum();
                total += kernel[j - i - 1] * dist;
            }
        }
        Ok(2.0 * total)
    }
}
