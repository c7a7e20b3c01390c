//! Noise coefficients `g` and Brownian increments on uniform time grids.
//!
//! Increments are drawn from ChaCha20 keyed by the seed, with the realization
//! index selecting the stream; every step consumes exactly four 32-bit words,
//! so step `n` of realization `r` does not depend on how paths are scheduled.
//! Increments are rounded to multiples of `2^-40`, which keeps every partial
//! sum exact and makes coarsening bitwise associative.

use std::fmt::Write as _;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::NoiseError;
use crate::field::CellField;

const QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    Zero,
    Additive { sigma0: f64 },
    Linear { lambda: f64 },
    /// `g(u) = sigma0 sin(omega u)`.
    Sine { sigma0: f64, omega: f64 },
}

/// Noise coefficient with its Lipschitz constant `L` and growth constant
/// `C_L = 2 max(L^2, g(0)^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    lipschitz: f64,
    growth: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Result<Self, NoiseError> {
        let params: &[f64] = match &kind {
            NoiseKind::Zero => &[],
            NoiseKind::Additive { sigma0 } => &[*sigma0],
            NoiseKind::Linear { lambda } => &[*lambda],
            NoiseKind::Sine { sigma0, omega } => &[*sigma0, *omega],
        };
        if let Some(&bad) = params.iter().find(|p| !p.is_finite()) {
            return Err(NoiseError::Parameter(bad));
        }
        let lipschitz = match kind {
            NoiseKind::Zero | NoiseKind::Additive { .. } => 0.0,
            NoiseKind::Linear { lambda } => lambda.abs(),
            NoiseKind::Sine { sigma0, omega } => (sigma0 * omega).abs(),
        };
        let mut model = Self {
            kind,
            lipschitz,
            growth: 0.0,
        };
        let g0 = model.g(0.0);
        model.growth = 2.0 * (lipschitz * lipschitz).max(g0 * g0);
        Ok(model)
    }

    pub fn zero() -> Self {
        Self::new(NoiseKind::Zero).expect("zero noise is valid")
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    pub fn g(&self, u: f64) -> f64 {
        match self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::Additive { sigma0 } => sigma0,
            NoiseKind::Linear { lambda } => lambda * u,
            NoiseKind::Sine { sigma0, omega } => sigma0 * libm::sin(omega * u),
        }
    }

    pub fn eval_into(&self, values: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(values) {
            *o = self.g(u);
        }
    }

    /// Componentwise `g(w_K)`.
    pub fn eval_g(&self, field: &CellField) -> CellField {
        let values = field.values().iter().map(|&u| self.g(u)).collect();
        CellField::from_trusted(field.mesh().clone(), values)
    }

    /// Largest observed `|g(a) - g(b)| / |a - b|` and `|g(r)|^2 / (1 + r^2)` over
    /// `samples` uniform pairs in `[-range, range]`.
    pub fn sampled_constants(&self, samples: usize, range: f64, seed: u64) -> SampledConstants {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut uniform = || range * (2.0 * unit_open(rng.next_u64()) - 1.0);
        let mut out = SampledConstants::default();
        for _ in 0..samples {
            let (a, b) = (uniform(), uniform());
            if a != b {
                out.lipschitz = out.lipschitz.max((self.g(a) - self.g(b)).abs() / (a - b).abs());
            }
            for r in [a, b] {
                out.growth = out.growth.max(self.g(r).powi(2) / (1.0 + r * r));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampledConstants {
    pub lipschitz: f64,
    pub growth: f64,
}

/// `(x + 0.5) 2^-53` for the top 53 bits: uniform on the open interval (0, 1).
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
}

fn quantize(x: f64) -> f64 {
    libm::round(x / QUANTUM) * QUANTUM
}

/// Increments `Delta_{n+1} W`, `n = 0..N`, on `t_n = n T / N`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    realization: u64,
    horizon: f64,
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn sample(seed: u64, steps: usize, horizon: f64) -> Result<Self, NoiseError> {
        Self::sample_realization(seed, 0, steps, horizon)
    }

    /// Path `realization` of the ensemble keyed by `seed`.
    pub fn sample_realization(seed: u64, realization: u64, steps: usize, horizon: f64) -> Result<Self, NoiseError> {
        if steps == 0 {
            return Err(NoiseError::ZeroSteps);
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(NoiseError::Horizon(horizon));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(realization);
        let scale = libm::sqrt(horizon / steps as f64);
        let increments = (0..steps).map(|_| quantize(scale * standard_normal(&mut rng))).collect();
        Ok(Self {
            seed,
            realization,
            horizon,
            increments,
        })
    }

    /// Path with explicit increments (replay, tests).
    pub fn from_increments(horizon: f64, increments: Vec<f64>) -> Result<Self, NoiseError> {
        if increments.is_empty() {
            return Err(NoiseError::ZeroSteps);
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(NoiseError::Horizon(horizon));
        }
        if let Some(&bad) = increments.iter().find(|v| !v.is_finite()) {
            return Err(NoiseError::Parameter(bad));
        }
        Ok(Self {
            seed: 0,
            realization: 0,
            horizon,
            increments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn realization(&self) -> u64 {
        self.realization
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W(t_n)` for `n = 0..=N`.
    pub fn values(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for &dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    pub fn terminal(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Sums of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self, NoiseError> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(NoiseError::Factor {
                factor,
                steps: self.steps(),
            });
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|c| c.iter().sum())
            .collect();
        Ok(Self {
            seed: self.seed,
            realization: self.realization,
            horizon: self.horizon,
            increments,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed={} realization={} horizon={:.16e}", self.seed, self.realization, self.horizon);
        out.push_str("step,increment\n");
        for (n, dw) in self.increments.iter().enumerate() {
            let _ = writeln!(out, "{},{:.16e}", n + 1, dw);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, NoiseError> {
        let mut meta = (0u64, 0u64, None::<f64>);
        let mut increments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    let bad = || NoiseError::Parse(format!("line {}: bad metadata '{token}'", lineno + 1));
                    let (key, value) = token.split_once('=').ok_or_else(bad)?;
                    match key {
                        "seed" => meta.0 = value.parse().map_err(|_| bad())?,
                        "realization" => meta.1 = value.parse().map_err(|_| bad())?,
                        "horizon" => meta.2 = Some(value.parse().map_err(|_| bad())?),
                        _ => return Err(bad()),
                    }
                }
                continue;
            }
            if line == "step,increment" {
                continue;
            }
            let bad = || NoiseError::Parse(format!("line {}: expected 'step,increment'", lineno + 1));
            let (step, value) = line.split_once(',').ok_or_else(bad)?;
            let step: usize = step.trim().parse().map_err(|_| bad())?;
            if step != increments.len() + 1 {
                return Err(NoiseError::Parse(format!("line {}: step {step} out of order", lineno + 1)));
            }
            increments.push(value.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let horizon = meta.2.ok_or_else(|| NoiseError::Parse("missing horizon metadata".into()))?;
        let mut path = Self::from_increments(horizon, increments)?;
        path.seed = meta.0;
        path.realization = meta.1;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_rect, Domain};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn declared_constants() {
        let cases = [
            (NoiseKind::Zero, 0.0, 0.0),
            (NoiseKind::Additive { sigma0: -0.5 }, 0.0, 0.5),
            (NoiseKind::Linear { lambda: -2.0 }, 2.0, 8.0),
            (NoiseKind::Sine { sigma0: 1.5, omega: 2.0 }, 3.0, 18.0),
        ];
        for (kind, l, cl) in cases {
            let m = NoiseModel::new(kind).unwrap();
            assert_eq!(m.lipschitz(), l);
            assert_eq!(m.growth(), cl);
        }
        assert!(matches!(
            NoiseModel::new(NoiseKind::Linear { lambda: f64::NAN }),
            Err(NoiseError::Parameter(_))
        ));
        assert!(NoiseModel::new(NoiseKind::Sine { sigma0: 1.0, omega: f64::INFINITY }).is_err());
    }

    #[test]
    fn sampled_constants_never_exceed_declared() {
        let kinds = [
            NoiseKind::Zero,
            NoiseKind::Additive { sigma0: 0.7 },
            NoiseKind::Linear { lambda: 1.3 },
            NoiseKind::Sine { sigma0: 0.8, omega: 2.5 },
        ];
        for (i, kind) in kinds.into_iter().enumerate() {
            let m = NoiseModel::new(kind).unwrap();
            let s = m.sampled_constants(10_000, 1e3, i as u64);
            assert!(s.lipschitz <= m.lipschitz() * (1.0 + 1e-12), "{kind:?}");
            assert!(s.growth <= m.growth(), "{kind:?}");
        }
    }

    #[test]
    fn eval_g_examples() {
        let mesh = Arc::new(build_uniform_rect(2, 1, &Domain::unit_square()).unwrap());
        let f = CellField::new(mesh.clone(), vec![1.0, -3.0]).unwrap();
        assert_eq!(NoiseModel::zero().eval_g(&f).values(), &[0.0, 0.0]);
        let lin = NoiseModel::new(NoiseKind::Linear { lambda: 2.0 }).unwrap();
        assert_eq!(lin.eval_g(&f).values(), &[2.0, -6.0]);
        let sine = NoiseModel::new(NoiseKind::Sine { sigma0: 1.0, omega: 1.0 }).unwrap();
        assert_eq!(sine.g(std::f64::consts::FRAC_PI_2), 1.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = BrownianPath::sample(42, 16, 1.0).unwrap();
        let b = BrownianPath::sample(42, 16, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, BrownianPath::sample(43, 16, 1.0).unwrap());
        assert_ne!(
            a.increments(),
            BrownianPath::sample_realization(42, 1, 16, 1.0).unwrap().increments()
        );
    }

    #[test]
    fn increments_are_key_prefixes() {
        // step n depends only on (seed, realization, n)
        let short = BrownianPath::sample_realization(7, 3, 5, 5.0).unwrap();
        let long = BrownianPath::sample_realization(7, 3, 9, 9.0).unwrap();
        assert_eq!(short.increments(), &long.increments()[..5]);
    }

    #[test]
    fn increments_lie_on_the_dyadic_grid() {
        // guards against silent changes of the generator or its key layout
        let p = BrownianPath::sample_realization(2024, 5, 3, 3.0).unwrap();
        let again = BrownianPath::sample_realization(2024, 5, 3, 3.0).unwrap();
        assert!(p.increments().iter().all(|&x| x == quantize(x) && x.abs() < 10.0));
        assert_eq!(p.increments(), again.increments());
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(BrownianPath::sample(1, 0, 1.0), Err(NoiseError::ZeroSteps));
        assert_eq!(BrownianPath::sample(1, 4, 0.0), Err(NoiseError::Horizon(0.0)));
        assert_eq!(BrownianPath::sample(1, 4, -1.0), Err(NoiseError::Horizon(-1.0)));
    }

    fn moment_check(steps: usize, horizon: f64, paths: u64) {
        let dt = horizon / steps as f64;
        let mut sums = vec![(0.0, 0.0); steps];
        let (mut wsum, mut wsq) = (0.0, 0.0);
        let mut w4 = 0.0;
        for r in 0..paths {
            let p = BrownianPath::sample_realization(99, r, steps, horizon).unwrap();
            for (s, &x) in sums.iter_mut().zip(p.increments()) {
                s.0 += x;
                s.1 += x * x;
            }
            let w = p.terminal();
            wsum += w;
            wsq += w * w;
            w4 += w.powi(4);
        }
        let m = paths as f64;
        for &(s1, s2) in &sums {
            let mean = s1 / m;
            let var = s2 / m - mean * mean;
            // SE of the mean sqrt(dt / M), of the variance sqrt(2 / M) dt
            assert!(mean.abs() < 4.0 * (dt / m).sqrt(), "mean {mean}");
            assert!((var - dt).abs() < 4.0 * (2.0 / m).sqrt() * dt, "var {var}");
        }
        let mean = wsum / m;
        let var = wsq / m - mean * mean;
        assert!(mean.abs() < 4.0 * (horizon / m).sqrt());
        let se_var = ((w4 / m - var * var) / m).sqrt();
        assert!((var - horizon).abs() < 4.0 * se_var);
    }

    #[test]
    fn increments_have_brownian_moments() {
        moment_check(4, 2.0, 100_000);
        moment_check(1, 0.5, 100_000);
    }

    #[test]
    fn coarsening_examples() {
        let p = BrownianPath::sample(5, 8, 1.0).unwrap();
        assert_eq!(p.coarsen(1).unwrap(), p);
        let one = p.coarsen(8).unwrap();
        assert_eq!(one.increments(), &[p.increments().iter().sum::<f64>()]);
        let two = p.coarsen(2).unwrap();
        for (k, &c) in two.increments().iter().enumerate() {
            assert_eq!(c, p.increments()[2 * k] + p.increments()[2 * k + 1]);
        }
        assert_eq!(p.coarsen(3), Err(NoiseError::Factor { factor: 3, steps: 8 }));
        assert!(p.coarsen(0).is_err());
    }

    proptest! {
        #[test]
        fn coarsening_composes_and_keeps_terminal(seed in any::<u64>(), a in 1usize..5, b in 1usize..5, k in 1usize..6) {
            let p = BrownianPath::sample(seed, a * b * k, 3.0).unwrap();
            let ab = p.coarsen(a).unwrap().coarsen(b).unwrap();
            prop_assert_eq!(&ab, &p.coarsen(a * b).unwrap());
            prop_assert_eq!(ab.terminal(), p.terminal());
            prop_assert_eq!(*p.values().last().unwrap(), p.terminal());
        }

        #[test]
        fn csv_round_trip(seed in any::<u64>(), steps in 1usize..20) {
            let p = BrownianPath::sample_realization(seed, 4, steps, 0.7).unwrap();
            prop_assert_eq!(BrownianPath::from_csv(&p.to_csv()).unwrap(), p);
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(BrownianPath::from_csv("step,increment\n1,0.5\n").is_err());
        assert!(BrownianPath::from_csv("# horizon=1\nstep,increment\n2,0.5\n").is_err());
        assert!(BrownianPath::from_csv("# horizon=1\n1;0.5\n").is_err());
        assert!(BrownianPath::from_csv("# horizon=1\n").is_err());
    }
}
