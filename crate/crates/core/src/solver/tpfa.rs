use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::SolverError;
use crate::mesh::{validate_admissibility, Mesh};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix of size `n`; duplicate entries are summed in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside a {n} x {n} matrix");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// Matrix Market coordinate format, 1-based, full (general) storage.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
            }
        }
        out
    }
}

/// Two-point flux matrix `A` and lumped mass `M = diag(m_K)` of an admissible mesh.
#[derive(Clone, Debug)]
pub struct TpfaOperator {
    mesh: Arc<Mesh>,
    matrix: CsrMatrix,
    mass: Vec<f64>,
}

impl TpfaOperator {
    /// Rejects meshes with a non-empty admissibility report.
    pub fn assemble(mesh: Arc<Mesh>) -> Result<Self, SolverError> {
        let report = validate_admissibility(&mesh);
        if !report.is_admissible() {
            return Err(SolverError::Inadmissible(report.to_string()));
        }
        Ok(Self::assemble_unchecked(mesh))
    }

    /// Assembles without validation; boundary edges carry no flux.
    pub fn assemble_unchecked(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_cells();
        let mut triplets = Vec::with_capacity(n + 2 * mesh.interior_edges().len());
        let mut diag = vec![0.0; n];
        for e in mesh.interior_edges() {
            let [k, l] = e.cells;
            let t = e.transmissibility();
            diag[k] += t;
            diag[l] += t;
            triplets.push((k, l, -t));
            triplets.push((l, k, -t));
        }
        triplets.extend(diag.iter().enumerate().map(|(k, &d)| (k, k, d)));
        let matrix = CsrMatrix::from_triplets(n, &triplets);
        let mass = mesh.cell_areas().collect();
        Self { mesh, matrix, mass }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }
}
