//! Priors and the (unnormalised) log-posterior.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, ParamPoint};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Prior on the residual variance, in whichever form the user wrote it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma2Prior {
    /// `σ² ~ InvGamma(shape, rate)`.
    InverseGamma { shape: f64, rate: f64 },
    /// `σ⁻² ~ Gamma(shape, rate)`.
    PrecisionGamma { shape: f64, rate: f64 },
}

impl Sigma2Prior {
    /// Canonical `(shape, rate)` of the inverse-gamma law on `σ²`. A
    /// `Gamma(a, b)` law on the precision is exactly `InvGamma(a, b)` on the
    /// variance.
    pub fn to_inverse_gamma(self) -> InverseGamma {
        match self {
            Sigma2Prior::InverseGamma { shape, rate }
            | Sigma2Prior::PrecisionGamma { shape, rate } => InverseGamma { shape, rate },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub rate: f64,
}

impl InverseGamma {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln()
            - self.rate / x
    }
}

/// Independent normal priors on the coefficients and an optional
/// inverse-gamma prior on `σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub beta_mean: DVector<f64>,
    pub beta_var: DVector<f64>,
    pub sigma2: Option<InverseGamma>,
}

impl PriorSpec {
    /// `βⱼ ~ N(0, 10³)`, `σ² ~ InvGamma(0.01, 0.01)`.
    pub fn weakly_informative(p: usize) -> Self {
        Self {
            beta_mean: DVector::zeros(p),
            beta_var: DVector::from_element(p, 1e3),
            sigma2: Some(InverseGamma {
                shape: 0.01,
                rate: 0.01,
            }),
        }
    }

    /// `βⱼ ~ N(0, 10³)`, `σ⁻² ~ Gamma(0.1, 0.1)`, the prior of the
    /// linear-regression simulations.
    pub fn simulation_default(p: usize) -> Self {
        Self::weakly_informative(p).with_sigma2(Sigma2Prior::PrecisionGamma {
            shape: 0.1,
            rate: 0.1,
        })
    }

    /// `N(mean, var)` on every coefficient.
    pub fn normal(p: usize, mean: f64, var: f64) -> Self {
        Self {
            beta_mean: DVector::from_element(p, mean),
            beta_var: DVector::from_element(p, var),
            sigma2: None,
        }
    }

    pub fn with_sigma2(mut self, prior: Sigma2Prior) -> Self {
        self.sigma2 = Some(prior.to_inverse_gamma());
        self
    }

    pub fn p(&self) -> usize {
        self.beta_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_mean.len() != self.beta_var.len() {
            return Err(Error::Dimension(
                "prior mean and variance lengths differ".into(),
            ));
        }
        if self.beta_mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("prior mean must be finite".into()));
        }
        if self.beta_var.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "prior variances must be positive and finite".into(),
            ));
        }
        if let Some(ig) = self.sigma2 {
            if !(ig.shape > 0.0 && ig.rate > 0.0) {
                return Err(Error::InvalidParameter(
                    "sigma2 prior shape and rate must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Log prior density of the coefficients (and `σ²` when present).
    pub fn ln_density(&self, theta: &ParamPoint) -> f64 {
        let mut lp = 0.0;
        for ((b, m), v) in theta
            .beta
            .iter()
            .zip(self.beta_mean.iter())
            .zip(self.beta_var.iter())
        {
            lp += -0.5 * (LN_2PI + v.ln()) - 0.5 * (b - m) * (b - m) / v;
        }
        if let (Some(ig), Some(s2)) = (self.sigma2, theta.sigma2) {
            lp += ig.ln_pdf(s2);
        }
        lp
    }
}

/// `log L(θ) + log π(θ)`. Invalid `σ²` (zero or negative) gives `−∞`; NaN
/// input is an error.
pub fn log_posterior(
    model: &ModelSpec,
    prior: &PriorSpec,
    theta: &ParamPoint,
    data: &Dataset,
) -> Result<f64> {
    prior.validate()?;
    if prior.p() != data.p() {
        return Err(Error::Dimension(format!(
            "prior has p = {}, data has p = {}",
            prior.p(),
            data.p()
        )));
    }
    if model.has_sigma2() && prior.sigma2.is_none() {
        return Err(Error::InvalidParameter(
            "linear regression needs a sigma2 prior".into(),
        ));
    }
    if theta.beta.iter().any(|b| b.is_nan()) || theta.sigma2.is_some_and(f64::is_nan) {
        return Err(Error::NonFinite("parameter".into()));
    }
    if theta.sigma2.is_some_and(|s2| s2 <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(model.log_likelihood(theta, data)? + prior.ln_density(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, Gamma, Normal};

    #[test]
    fn precision_gamma_converts_to_inverse_gamma() {
        let ig = Sigma2Prior::PrecisionGamma {
            shape: 0.1,
            rate: 0.1,
        }
        .to_inverse_gamma();
        // change of variables: p_{σ²}(s) = p_τ(1/s) / s²
        let g = Gamma::new(0.1, 0.1).unwrap();
        for s in [0.3, 1.0, 4.5] {
            assert_relative_eq!(
                ig.ln_pdf(s),
                g.ln_pdf(1.0 / s) - 2.0 * f64::ln(s),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn flat_prior_is_constant_shift() {
        let model = ModelSpec::poisson();
        let data = Dataset::new(
            vec![1.0, 3.0, 0.0],
            vec![vec![1.0, 0.1], vec![1.0, 0.5], vec![1.0, -0.4]],
        )
        .unwrap();
        let prior = PriorSpec::normal(2, 0.0, 1e12);
        let a = ParamPoint::new(vec![0.2, -0.3]);
        let b = ParamPoint::new(vec![-0.5, 0.9]);
        let shift = |t: &ParamPoint| {
            log_posterior(&model, &prior, t, &data).unwrap()
                - model.log_likelihood(t, &data).unwrap()
        };
        assert!((shift(&a) - shift(&b)).abs() < 1e-9);
    }

    #[test]
    fn empty_data_rejected() {
        assert!(matches!(
            Dataset::intercept_only(vec![]),
            Err(Error::EmptyData)
        ));
    }

    #[test]
    fn linear_matches_density_sum() {
        let model = ModelSpec::linear();
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let y = vec![0.5, 1.2, 3.1];
        let data = Dataset::new(y.clone(), rows.clone()).unwrap();
        let prior = PriorSpec::normal(2, 0.5, 4.0).with_sigma2(Sigma2Prior::InverseGamma {
            shape: 2.0,
            rate: 1.5,
        });
        let theta = ParamPoint::with_sigma2(vec![0.1, 1.3], 0.8);

        let mut oracle = 0.0;
        for (row, yi) in rows.iter().zip(&y) {
            let mu = row[0] * 0.1 + row[1] * 1.3;
            oracle += Normal::new(mu, 0.8f64.sqrt()).unwrap().ln_pdf(*yi);
        }
        for b in [0.1, 1.3] {
            oracle += Normal::new(0.5, 2.0).unwrap().ln_pdf(b);
        }
        // InvGamma(a, b) on σ² is Gamma(a, b) on 1/σ² with Jacobian 1/σ⁴
        oracle += Gamma::new(2.0, 1.5).unwrap().ln_pdf(1.0 / 0.8) - 2.0 * 0.8f64.ln();

        let lp = log_posterior(&model, &prior, &theta, &data).unwrap();
        assert_relative_eq!(lp, oracle, epsilon = 1e-10);
    }

    #[test]
    fn nonpositive_sigma2_is_minus_infinity_and_nan_errors() {
        let model = ModelSpec::linear();
        let data = Dataset::new(vec![1.0, 2.0], vec![vec![1.0], vec![1.0]]).unwrap();
        let prior = PriorSpec::weakly_informative(1);
        let lp = log_posterior(&model, &prior, &ParamPoint::with_sigma2(vec![0.0], -1.0), &data)
            .unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
        assert!(log_posterior(
            &model,
            &prior,
            &ParamPoint::with_sigma2(vec![f64::NAN], 1.0),
            &data
        )
        .is_err());
    }
}
