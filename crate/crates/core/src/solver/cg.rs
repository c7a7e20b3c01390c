use nalgebra::{DMatrix, DVector};

use super::tpfa::{CsrMatrix, TpfaOperator};
use crate::error::SolverError;

/// Largest system the dense factorization oracle accepts.
pub const DENSE_ORACLE_LIMIT: usize = 400;

/// Symmetric positive definite operator for conjugate gradients.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl SpdOperator for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        CsrMatrix::apply(self, x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

/// `M + dt A`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedSystem<'a> {
    pub operator: &'a TpfaOperator,
    pub dt: f64,
}

impl SpdOperator for ShiftedSystem<'_> {
    fn dim(&self) -> usize {
        self.operator.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let a = self.operator.matrix();
        let mass = self.operator.mass();
        for (i, yi) in y.iter_mut().enumerate() {
            let ax: f64 = a.row(i).map(|(j, v)| v * x[j]).sum();
            *yi = mass[i] * x[i] + self.dt * ax;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let a = self.operator.matrix().diagonal();
        self.operator
            .mass()
            .iter()
            .zip(a)
            .map(|(m, d)| m + self.dt * d)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `||b - S x|| / ||b||`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reusable CG buffers.
#[derive(Clone, Debug, Default)]
pub struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients; `x` holds the initial guess on
/// entry and the solution on exit.
pub fn conjugate_gradient(
    system: &impl SpdOperator,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tolerance: f64,
    max_iterations: usize,
    work: &mut CgWorkspace,
) -> Result<CgOutcome, SolverError> {
    let n = system.dim();
    if b.len() != n || x.len() != n || inv_diag.len() != n {
        return Err(SolverError::Dimension {
            matrix: n,
            vector: b.len().min(x.len()),
        });
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let CgWorkspace { r, z, p, q } = work;
    for v in [&mut *r, &mut *z, &mut *p, &mut *q] {
        v.clear();
        v.resize(n, 0.0);
    }
    system.apply(x, q);
    for i in 0..n {
        r[i] = b[i] - q[i];
    }
    let mut res = dot(r, r).sqrt() / bnorm;
    if res <= tolerance {
        return Ok(CgOutcome {
            iterations: 0,
            residual: res,
        });
    }
    for i in 0..n {
        z[i] = inv_diag[i] * r[i];
        p[i] = z[i];
    }
    let mut rz = dot(r, z);
    for it in 1..=max_iterations {
        system.apply(p, q);
        let pq = dot(p, q);
        if !(pq > 0.0) {
            return Err(SolverError::NotPositiveDefinite);
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = dot(r, r).sqrt() / bnorm;
        if res <= tolerance {
            // confirm against the true residual to avoid recurrence drift
            system.apply(x, q);
            let true_res = b.iter().zip(q.iter()).map(|(bi, qi)| (bi - qi).powi(2)).sum::<f64>().sqrt() / bnorm;
            if true_res <= tolerance {
                return Ok(CgOutcome {
                    iterations: it,
                    residual: true_res,
                });
            }
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        let rz_next = dot(r, z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged {
        iterations: max_iterations,
        residual: res,
    })
}

/// Solves `S x = b` from a zero initial guess.
pub fn solve_linear_system(
    system: &impl SpdOperator,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, CgOutcome), SolverError> {
    let inv_diag: Vec<f64> = system.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; system.dim()];
    let outcome = conjugate_gradient(system, &inv_diag, b, &mut x, tolerance, max_iterations, &mut CgWorkspace::default())?;
    Ok((x, outcome))
}

/// Dense Cholesky solve, used as an oracle for small systems.
pub fn dense_cholesky_solve(system: &impl SpdOperator, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = system.dim();
    if n > DENSE_ORACLE_LIMIT {
        return Err(SolverError::TooLarge {
            size: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    if b.len() != n {
        return Err(SolverError::Dimension { matrix: n, vector: b.len() });
    }
    let mut dense = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        system.apply(&unit, &mut col);
        unit[j] = 0.0;
        for i in 0..n {
            dense[(i, j)] = col[i];
        }
    }
    let chol = dense.cholesky().ok_or(SolverError::NotPositiveDefinite)?;
    Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}
