//! Monte Carlo ensembles and numerical checks of the a priori estimates.

mod checks;
mod convergence;
mod ensemble;
mod translate;

pub use checks::{
    difference_norms, energy_constant, energy_estimate_check, energy_estimate_check_scaled, gagliardo_bound_check,
    left_right_gap_check, max_bound_check, pathwise_uniqueness_check, BoundednessReport, EnergyReport,
    GagliardoLevel, GagliardoReport, GapReport, UniquenessReport, GROWTH_ALLOWANCE,
};
pub use convergence::{
    convergence_study, ConvergenceReport, ConvergenceSettings, ExponentError, LevelError, LevelSpec,
    ModalSolution, Reference,
};
pub use ensemble::{run_ensemble, EnsembleStats};
pub use translate::{
    space_translate_check, time_translate_check, translate_integral, ShiftOverlap, SpaceTranslateReport,
    TimeTranslateReport, TranslateSettings,
};

use crate::error::AnalysisError;

/// Sample mean with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_err: 0.0,
        }
    }

    /// Mean and `s / sqrt(M)`; identical samples, in particular a single one,
    /// have zero standard error.
    pub fn from_samples(samples: &[f64]) -> Self {
        let m = samples.len();
        if m == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
            };
        }
        if samples.iter().all(|&x| x == samples[0]) {
            return Self::exact(samples[0]);
        }
        let mean = samples.iter().sum::<f64>() / m as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
        Self {
            mean,
            std_err: (var / m as f64).sqrt(),
        }
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.std_err
    }

    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.std_err
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mean: c * self.mean,
            std_err: c.abs() * self.std_err,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.std_err.is_finite()
    }
}

/// `(E X^p)^{1/p}` with a delta-method standard error.
pub(crate) fn lp_estimate(samples: &[f64], p: f64) -> Estimate {
    let powered: Vec<f64> = samples.iter().map(|x| x.powf(p)).collect();
    let e = Estimate::from_samples(&powered);
    if e.mean <= 0.0 {
        return Estimate::exact(0.0);
    }
    let value = e.mean.powf(1.0 / p);
    Estimate {
        mean: value,
        std_err: value / (p * e.mean) * e.std_err,
    }
}

/// Combined standard error of two independent estimates.
pub(crate) fn joint_se(a: &Estimate, b: &Estimate) -> f64 {
    a.std_err.hypot(b.std_err)
}

/// Least-squares slope of `ln y` against `ln x`.
pub(crate) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub(crate) fn check_samples(samples: usize, needed: usize) -> Result<(), AnalysisError> {
    if samples < needed {
        return Err(AnalysisError::TooFewSamples { needed, got: samples });
    }
    Ok(())
}

/// Runs `f` for every realization index in parallel and returns the results
/// in index order; the first failure by index is reported.
pub(crate) fn map_realizations<T: Send>(
    samples: usize,
    f: impl Fn(usize) -> Result<T, crate::error::SolverError> + Sync,
) -> Result<Vec<T>, AnalysisError> {
    use rayon::prelude::*;
    let results: Vec<Result<T, _>> = (0..samples).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(samples);
    for (index, r) in results.into_iter().enumerate() {
        out.push(r.map_err(|source| AnalysisError::Realization { index, source })?);
    }
    Ok(out)
}
