use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec};
use crate::seed;

/// Administrative censoring time of the Weibull scenarios.
pub const DEFAULT_CENSOR_TIME: f64 = 10.0;

/// Outcome mechanism of a simulation scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    /// `Y | U ~ N(U + aU², 1)`.
    LinearQuadratic { a: f64 },
    /// `Y | U ~ Poisson(exp(U + aU²))`.
    PoissonQuadratic { a: f64 },
    /// `T | U ~ Weibull(κ, exp(β₀ + β₁U))` with hazard `λκt^{κ−1}`.
    WeibullPh { kappa: f64, beta0: f64, beta1: f64 },
    /// Linear-quadratic mean on a fixed, evenly spaced design.
    FixedDesignLinearQuadratic { a: f64 },
}

impl DgpKind {
    /// The working model fitted to data from this mechanism.
    pub fn working_model(&self) -> ModelSpec {
        match self {
            DgpKind::LinearQuadratic { .. } | DgpKind::FixedDesignLinearQuadratic { .. } => {
                ModelSpec::linear()
            }
            DgpKind::PoissonQuadratic { .. } => ModelSpec::poisson(),
            DgpKind::WeibullPh { .. } => ModelSpec::exponential_ph(),
        }
    }

    /// Whether the working model contains the true distribution.
    pub fn correctly_specified(&self) -> bool {
        match *self {
            DgpKind::LinearQuadratic { a }
            | DgpKind::PoissonQuadratic { a }
            | DgpKind::FixedDesignLinearQuadratic { a } => a == 0.0,
            DgpKind::WeibullPh { kappa, .. } => kappa == 1.0,
        }
    }
}

/// Distribution (or fixed layout) of the scalar covariate `U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { lo: f64, hi: f64 },
    StandardNormal,
    /// `n` points from `lo` to `hi` inclusive, identical in every replicate.
    EvenlySpaced { lo: f64, hi: f64 },
}

impl CovariateLaw {
    pub fn is_fixed(&self) -> bool {
        matches!(self, CovariateLaw::EvenlySpaced { .. })
    }

    /// Mean and variance of a random covariate.
    pub fn moments(&self) -> Option<(f64, f64)> {
        match *self {
            CovariateLaw::Uniform { lo, hi } => Some((0.5 * (lo + hi), (hi - lo).powi(2) / 12.0)),
            CovariateLaw::StandardNormal => Some((0.0, 1.0)),
            CovariateLaw::EvenlySpaced { .. } => None,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, i: usize, n: usize) -> f64 {
        match *self {
            CovariateLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            CovariateLaw::StandardNormal => StandardNormal.sample(rng),
            CovariateLaw::EvenlySpaced { lo, hi } => {
                if n == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            }
        }
    }
}

/// A complete data-generating process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub covariate_law: CovariateLaw,
    pub censor_time: f64,
}

impl DgpSpec {
    /// `U ~ U(0, 3)`.
    pub fn linear_quadratic(a: f64, n: usize) -> Self {
        Self {
            kind: DgpKind::LinearQuadratic { a },
            n,
            covariate_law: CovariateLaw::Uniform { lo: 0.0, hi: 3.0 },
            censor_time: DEFAULT_CENSOR_TIME,
        }
    }

    /// `U ~ U(−3, 3)`.
    pub fn poisson_quadratic(a: f64, n: usize) -> Self {
        Self {
            kind: DgpKind::PoissonQuadratic { a },
            n,
            covariate_law: CovariateLaw::Uniform { lo: -3.0, hi: 3.0 },
            censor_time: DEFAULT_CENSOR_TIME,
        }
    }

    /// `U ~ U(0, 3)`, `β₀ = 0`, censoring at 10.
    pub fn weibull_ph(kappa: f64, beta1: f64, n: usize) -> Self {
        Self {
            kind: DgpKind::WeibullPh {
                kappa,
                beta0: 0.0,
                beta1,
            },
            n,
            covariate_law: CovariateLaw::Uniform { lo: 0.0, hi: 3.0 },
            censor_time: DEFAULT_CENSOR_TIME,
        }
    }

    /// `n` evenly spaced points on `[0, 3]`.
    pub fn fixed_design(a: f64, n: usize) -> Self {
        Self {
            kind: DgpKind::FixedDesignLinearQuadratic { a },
            n,
            covariate_law: CovariateLaw::EvenlySpaced { lo: 0.0, hi: 3.0 },
            censor_time: DEFAULT_CENSOR_TIME,
        }
    }

    pub fn with_covariates(mut self, law: CovariateLaw) -> Self {
        self.covariate_law = law;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!(
                "need at least 3 observations for two coefficients, got n = {}",
                self.n
            )));
        }
        if let DgpKind::WeibullPh { kappa, .. } = self.kind {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
            }
        }
        if !(self.censor_time > 0.0) {
            return Err(Error::Config("censoring time must be positive".into()));
        }
        if let CovariateLaw::Uniform { lo, hi } | CovariateLaw::EvenlySpaced { lo, hi } =
            self.covariate_law
        {
            if !(hi > lo) {
                return Err(Error::Config("covariate range is empty".into()));
            }
        }
        if matches!(self.kind, DgpKind::FixedDesignLinearQuadratic { .. })
            && !self.covariate_law.is_fixed()
        {
            return Err(Error::Config(
                "fixed-design scenarios need an evenly spaced covariate layout".into(),
            ));
        }
        Ok(())
    }

    /// Conditional mean of the outcome (`E[Y | U]`, or the rate for Poisson).
    pub fn mean_at(&self, u: f64) -> f64 {
        match self.kind {
            DgpKind::LinearQuadratic { a } | DgpKind::FixedDesignLinearQuadratic { a } => {
                u + a * u * u
            }
            DgpKind::PoissonQuadratic { a } => (u + a * u * u).exp(),
            DgpKind::WeibullPh { beta0, beta1, .. } => (beta0 + beta1 * u).exp(),
        }
    }

    /// Covariate values for a dataset of size `n`.
    pub(crate) fn covariates<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.covariate_law.draw(rng, i, n)).collect()
    }
}

/// Draws one dataset with design rows `(1, U)`. Deterministic in `seed`.
pub fn generate(dgp: &DgpSpec, seed: u64) -> Result<Dataset> {
    dgp.validate()?;
    generate_sized(dgp, dgp.n, seed)
}

/// As [`generate`] but with an explicit sample size (used by the KL oracle).
pub fn generate_sized(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let u = dgp.covariates(&mut rng, n);
    let mut x = Vec::with_capacity(2 * n);
    for &ui in &u {
        x.push(1.0);
        x.push(ui);
    }
    match dgp.kind {
        DgpKind::LinearQuadratic { .. } | DgpKind::FixedDesignLinearQuadratic { .. } => {
            let y = u
                .iter()
                .map(|&ui| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    dgp.mean_at(ui) + e
                })
                .collect();
            Dataset::from_flat(y, x, 2)
        }
        DgpKind::PoissonQuadratic { .. } => {
            let mut y = Vec::with_capacity(n);
            for &ui in &u {
                let rate = dgp.mean_at(ui);
                let v = if rate > 0.0 {
                    Poisson::new(rate)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                y.push(v);
            }
            Dataset::from_flat(y, x, 2)
        }
        DgpKind::WeibullPh { kappa, .. } => {
            let mut time = Vec::with_capacity(n);
            let mut event = Vec::with_capacity(n);
            for &ui in &u {
                let lambda = dgp.mean_at(ui);
                // inversion: S(t) = exp(−λ t^κ)
                let v: f64 = 1.0 - rng.gen::<f64>();
                let t = (-v.ln() / lambda).powf(1.0 / kappa);
                if t <= dgp.censor_time {
                    time.push(t);
                    event.push(true);
                } else {
                    time.push(dgp.censor_time);
                    event.push(false);
                }
            }
            Dataset::survival_flat(time, event, x, 2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        for dgp in [
            DgpSpec::linear_quadratic(1.0, 30),
            DgpSpec::poisson_quadratic(0.25, 30),
            DgpSpec::weibull_ph(0.8, -0.5, 30),
            DgpSpec::fixed_design(2.0, 30),
        ] {
            assert_eq!(generate(&dgp, 5).unwrap(), generate(&dgp, 5).unwrap());
            assert_ne!(generate(&dgp, 5).unwrap(), generate(&dgp, 6).unwrap());
        }
    }

    #[test]
    fn fixed_design_keeps_covariates() {
        let dgp = DgpSpec::fixed_design(-1.0, 5);
        let a = generate(&dgp, 1).unwrap();
        let b = generate(&dgp, 2).unwrap();
        assert_eq!(a.x_flat(), b.x_flat());
        assert_eq!(a.x_row(4), &[1.0, 3.0]);
        assert_eq!(a.x_row(2), &[1.0, 1.5]);
    }

    #[test]
    fn uniform_covariates_in_range() {
        let d = generate(&DgpSpec::poisson_quadratic(0.0, 500), 3).unwrap();
        assert!((0..500).all(|i| (-3.0..=3.0).contains(&d.x_row(i)[1])));
    }

    #[test]
    fn weibull_censoring() {
        let dgp = DgpSpec::weibull_ph(1.0, 3.0, 2000);
        let d = generate(&dgp, 9).unwrap();
        assert!(d.times().unwrap().iter().all(|&t| t > 0.0 && t <= 10.0));
        // with β₁ = 3 the hazard is large, almost nobody survives to 10
        assert!(d.event_count().unwrap() > 1990);
        let slow = DgpSpec::weibull_ph(1.0, -3.0, 2000);
        let d = generate(&slow, 9).unwrap();
        assert!(d.event_count().unwrap() < 1900);
    }

    #[test]
    fn exponential_times_have_unit_mean() {
        let dgp = DgpSpec::weibull_ph(1.0, 0.0, 200_000).with_covariates(CovariateLaw::StandardNormal);
        let d = generate(&dgp, 11).unwrap();
        let mean = d.times().unwrap().iter().sum::<f64>() / 200_000.0;
        assert!((mean - (1.0 - (-10f64).exp())).abs() < 0.01);
    }

    #[test]
    fn validation() {
        assert!(DgpSpec::linear_quadratic(0.0, 2).validate().is_err());
        assert!(DgpSpec::weibull_ph(0.0, 0.0, 20).validate().is_err());
        let bad = DgpSpec::fixed_design(0.0, 20).with_covariates(CovariateLaw::StandardNormal);
        assert!(bad.validate().is_err());
    }
}
