use std::sync::Arc;

use super::{check_samples, map_realizations, Estimate};
use crate::error::AnalysisError;
use crate::field::{h1_seminorm_sq, l2_norm_sq, CellField};
use crate::noise::{BrownianPath, NoiseModel};
use crate::solver::{Scheme, SchemeConfig, TpfaOperator};

/// Per-time-index Monte Carlo estimates; every vector has `N + 1` entries and
/// entry `n` refers to the partial sums over `k < n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub samples: usize,
    pub master_seed: u64,
    pub horizon: f64,
    pub steps: usize,
    pub domain_area: f64,
    /// `E ||u^n||^2`.
    pub norm_sq: Vec<Estimate>,
    /// `E max_{k <= n} ||u^k||^2`.
    pub max_norm_sq: Vec<Estimate>,
    /// `E dt sum_{k<n} |u^{k+1}|_{1,h}^2`.
    pub dissipation: Vec<Estimate>,
    /// `E sum_{k<n} ||u^{k+1} - u^k||^2`.
    pub increments: Vec<Estimate>,
    /// `E [||u^n||^2 + sum_{k<n} ||u^{k+1} - u^k||^2 + 2 dt sum_{k<n} |u^{k+1}|_{1,h}^2]`,
    /// with the standard error of the combination.
    pub energy: Vec<Estimate>,
}

impl EnsembleStats {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn initial_norm_sq(&self) -> f64 {
        self.norm_sq[0].mean
    }
}

struct Sample {
    norm_sq: Vec<f64>,
    max_norm_sq: Vec<f64>,
    dissipation: Vec<f64>,
    increments: Vec<f64>,
}

/// `samples` trajectories driven by realizations `0..samples` of `master_seed`.
pub fn run_ensemble(
    operator: &TpfaOperator,
    config: &SchemeConfig,
    model: &NoiseModel,
    u0: &CellField,
    samples: usize,
    master_seed: u64,
) -> Result<EnsembleStats, AnalysisError> {
    check_samples(samples, 2)?;
    let scheme = Scheme::new(operator, *model, *config)?;
    let mesh = operator.mesh();
    if !Arc::ptr_eq(u0.mesh(), mesh) && **u0.mesh() != **mesh {
        return Err(crate::error::FieldError::MeshMismatch.into());
    }
    let dt = config.dt();
    let n_steps = config.steps;

    let runs = map_realizations(samples, |r| {
        let path = BrownianPath::sample_realization(master_seed, r as u64, n_steps, config.horizon)
            .map_err(|e| crate::error::SolverError::Config(e.to_string()))?;
        let mut s = Sample {
            norm_sq: Vec::with_capacity(n_steps + 1),
            max_norm_sq: Vec::with_capacity(n_steps + 1),
            dissipation: Vec::with_capacity(n_steps + 1),
            increments: Vec::with_capacity(n_steps + 1),
        };
        let mut prev: Vec<f64> = Vec::new();
        scheme.for_each_snapshot(&path, u0.values(), |n, u| {
            let norm = l2_norm_sq(mesh, u);
            if n == 0 {
                s.norm_sq.push(norm);
                s.max_norm_sq.push(norm);
                s.dissipation.push(0.0);
                s.increments.push(0.0);
            } else {
                let diff: Vec<f64> = u.iter().zip(&prev).map(|(a, b)| a - b).collect();
                s.norm_sq.push(norm);
                s.max_norm_sq.push(s.max_norm_sq[n - 1].max(norm));
                s.dissipation.push(s.dissipation[n - 1] + dt * h1_seminorm_sq(mesh, u));
                s.increments.push(s.increments[n - 1] + l2_norm_sq(mesh, &diff));
            }
            prev.clear();
            prev.extend_from_slice(u);
        })?;
        Ok(s)
    })?;

    let column = |pick: &dyn Fn(&Sample, usize) -> f64| -> Vec<Estimate> {
        (0..=n_steps)
            .map(|n| {
                let xs: Vec<f64> = runs.iter().map(|s| pick(s, n)).collect();
                Estimate::from_samples(&xs)
            })
            .collect()
    };
    Ok(EnsembleStats {
        samples,
        master_seed,
        horizon: config.horizon,
        steps: n_steps,
        domain_area: mesh.domain_area(),
        norm_sq: column(&|s, n| s.norm_sq[n]),
        max_norm_sq: column(&|s, n| s.max_norm_sq[n]),
        dissipation: column(&|s, n| s.dissipation[n]),
        increments: column(&|s, n| s.increments[n]),
        energy: column(&|s, n| s.norm_sq[n] + s.increments[n] + 2.0 * s.dissipation[n]),
    })
}
