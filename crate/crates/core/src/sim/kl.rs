use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dgp::{generate_sized, CovariateLaw, DgpKind, DgpSpec};
use crate::error::{Error, Result};
use crate::freq::{fit_mle, FitOptions};
use crate::linalg::SpdFactor;
use crate::model::ModelSpec;
use crate::seed;

/// Sample size of the Monte Carlo oracle for Poisson scenarios.
pub const POISSON_ORACLE_N: usize = 10_000_000;
/// Sample size of the Monte Carlo oracle for Weibull scenarios.
pub const WEIBULL_ORACLE_N: usize = 1_000_000;

/// Minimal Kullback-Leibler point of the working model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlPoint {
    pub theta: Vec<f64>,
    /// Monte Carlo standard error when the point comes from a large-sample fit.
    pub mc_se: Option<Vec<f64>>,
}

impl KlPoint {
    pub fn slope(&self) -> f64 {
        self.theta[1]
    }
}

fn check_model(dgp: &DgpSpec, model: &ModelSpec) -> Result<()> {
    let expected = dgp.kind.working_model().family();
    if model.family() != expected {
        return Err(Error::FamilyMismatch(format!(
            "{} data need a {expected} working model, got {}",
            kind_name(&dgp.kind),
            model.family()
        )));
    }
    Ok(())
}

fn kind_name(kind: &DgpKind) -> &'static str {
    match kind {
        DgpKind::LinearQuadratic { .. } => "linear-quadratic",
        DgpKind::PoissonQuadratic { .. } => "Poisson-quadratic",
        DgpKind::WeibullPh { .. } => "Weibull",
        DgpKind::FixedDesignLinearQuadratic { .. } => "fixed-design linear-quadratic",
    }
}

/// Closed form for linear scenarios, large-sample MLE otherwise.
pub fn kl_point(dgp: &DgpSpec, model: &ModelSpec) -> Result<KlPoint> {
    let n = match dgp.kind {
        DgpKind::PoissonQuadratic { .. } => POISSON_ORACLE_N,
        _ => WEIBULL_ORACLE_N,
    };
    kl_point_with(dgp, model, n, seed::label_hash("kl-oracle"))
}

/// [`kl_point`] with an explicit oracle sample size and seed; the linear
/// cases ignore both.
pub fn kl_point_with(dgp: &DgpSpec, model: &ModelSpec, oracle_n: usize, seed: u64) -> Result<KlPoint> {
    check_model(dgp, model)?;
    dgp.validate()?;
    match dgp.kind {
        DgpKind::LinearQuadratic { a } => {
            let (m, v) = dgp
                .covariate_law
                .moments()
                .ok_or_else(|| Error::Config("random-design scenario with fixed covariates".into()))?;
            if !matches!(
                dgp.covariate_law,
                CovariateLaw::Uniform { .. } | CovariateLaw::StandardNormal
            ) {
                return Err(Error::Unsupported("covariate law".into()));
            }
            // projection of u + a u² on (1, u) for a law symmetric about m:
            // Cov(U, U²) = 2m Var(U)
            Ok(KlPoint {
                theta: vec![a * (v - m * m), 1.0 + 2.0 * a * m],
                mc_se: None,
            })
        }
        DgpKind::FixedDesignLinearQuadratic { .. } => {
            let mut rng = seed::rng(0);
            let u = dgp.covariates(&mut rng, dgp.n);
            let x = DMatrix::from_fn(dgp.n, 2, |i, j| if j == 0 { 1.0 } else { u[i] });
            let mean = DVector::from_iterator(dgp.n, u.iter().map(|&ui| dgp.mean_at(ui)));
            let beta = SpdFactor::new(&(x.transpose() * &x), "fixed design")?
                .solve_vec(&(x.transpose() * mean));
            Ok(KlPoint {
                theta: beta.iter().copied().collect(),
                mc_se: None,
            })
        }
        DgpKind::PoissonQuadratic { .. } | DgpKind::WeibullPh { .. } => {
            let data = generate_sized(dgp, oracle_n, seed)?;
            let fit = fit_mle(model, &data, FitOptions::default())?;
            Ok(KlPoint {
                theta: fit.theta_mle.beta.iter().copied().collect(),
                mc_se: Some(fit.robust_se.iter().copied().collect()),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_closed_form() {
        let k = kl_point(&DgpSpec::linear_quadratic(2.0, 50), &ModelSpec::linear()).unwrap();
        assert_relative_eq!(k.slope(), 7.0, epsilon = 1e-14);
        assert_relative_eq!(k.theta[0], -3.0, epsilon = 1e-14);
        let k = kl_point(&DgpSpec::linear_quadratic(0.0, 50), &ModelSpec::linear()).unwrap();
        assert_eq!(k.theta, vec![0.0, 1.0]);
    }

    #[test]
    fn linear_closed_form_matches_large_ols() {
        let dgp = DgpSpec::linear_quadratic(-1.0, 50);
        let data = generate_sized(&dgp, 400_000, 4).unwrap();
        let fit = fit_mle(&ModelSpec::linear(), &data, FitOptions::default()).unwrap();
        let k = kl_point(&dgp, &ModelSpec::linear()).unwrap();
        assert!((fit.theta_mle.beta[1] - k.slope()).abs() < 0.02);
        assert!((fit.theta_mle.beta[0] - k.theta[0]).abs() < 0.03);
    }

    #[test]
    fn fixed_design_projection() {
        // on a symmetric grid of points the slope is 1 + a (lo + hi) as well
        let k = kl_point(&DgpSpec::fixed_design(2.0, 101), &ModelSpec::linear()).unwrap();
        assert_relative_eq!(k.slope(), 7.0, epsilon = 1e-10);
    }

    #[test]
    fn family_mismatch() {
        let err = kl_point(&DgpSpec::poisson_quadratic(0.0, 50), &ModelSpec::linear()).unwrap_err();
        assert!(matches!(err, Error::FamilyMismatch(_)));
    }
}
