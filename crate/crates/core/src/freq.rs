//! Frequentist reference fits: maximum likelihood, model-based standard
//! errors and the HC0 sandwich covariance.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdFactor};
use crate::model::{Dataset, Family, ModelSpec, ParamPoint};

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Convergence threshold on the sup-norm of the mean score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Coefficients beyond this magnitude are treated as a diverging fit.
pub const DIVERGENCE_BOUND: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct FreqFit {
    pub theta_mle: ParamPoint,
    /// `√diag((n Iₙ(θ̂))⁻¹)`.
    pub model_se: DVector<f64>,
    /// `(n Iₙ(θ̂))⁻¹`.
    pub model_cov: DMatrix<f64>,
    pub sandwich_cov: DMatrix<f64>,
    pub robust_se: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Serialize)]
struct FreqFitRow<'a> {
    estimate: &'a [f64],
    model_se: &'a [f64],
    robust_se: &'a [f64],
    iterations: usize,
}

impl FreqFit {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FreqFitRow {
            estimate: self.theta_mle.beta.as_slice(),
            model_se: self.model_se.as_slice(),
            robust_se: self.robust_se.as_slice(),
            iterations: self.iterations,
        })
        .unwrap_or(serde_json::Value::Null)
    }
}

/// Maximum likelihood fit. Linear and normal-mean models are solved in closed
/// form (`σ̂² = RSS/n`); Poisson and exponential PH use Newton's method with
/// step halving.
pub fn fit_mle(model: &ModelSpec, data: &Dataset, opts: FitOptions) -> Result<FreqFit> {
    model.validate_data(data)?;
    data.check_full_rank()?;
    let (theta, iterations) = match model.family() {
        Family::NormalMeanKnownVar => {
            let mean = data.y().iter().sum::<f64>() / data.n() as f64;
            (ParamPoint::new(vec![mean]), 0)
        }
        Family::LinearRegression => (ols(data)?, 0),
        Family::PoissonRegression | Family::ExponentialPh => newton(model, data, opts)?,
    };
    finish(model, data, theta, iterations)
}

fn ols(data: &Dataset) -> Result<ParamPoint> {
    let gram = SpdFactor::new(&data.gram(), "X'X").map_err(|_| Error::RankDeficient)?;
    let beta = gram.solve_vec(&data.xty());
    let rss: f64 = data
        .iter()
        .map(|o| {
            let r = o.y - crate::linalg::dot(beta.as_slice(), o.x);
            r * r
        })
        .sum();
    let sigma2 = rss / data.n() as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidData(
            "residual variance is zero: the linear model fits the data exactly".into(),
        ));
    }
    Ok(ParamPoint::from_vector(beta, Some(sigma2)))
}

fn starting_point(model: &ModelSpec, data: &Dataset) -> DVector<f64> {
    let mut beta = DVector::zeros(data.p());
    let has_intercept = (0..data.n()).all(|i| data.x_row(i)[0] == 1.0);
    if has_intercept {
        beta[0] = match model.family() {
            Family::PoissonRegression => {
                let mean = data.y().iter().sum::<f64>() / data.n() as f64;
                mean.max(1e-3).ln()
            }
            Family::ExponentialPh => {
                let events = data.event_count().unwrap_or(0) as f64;
                let exposure: f64 = data.times().map_or(0.0, |t| t.iter().sum());
                (events.max(0.5) / exposure.max(1e-12)).ln()
            }
            _ => 0.0,
        };
    }
    beta
}

fn mean_score(model: &ModelSpec, theta: &ParamPoint, data: &Dataset) -> Result<DVector<f64>> {
    let mut s = DVector::zeros(data.p());
    for obs in data.iter() {
        let (r, _) = model.residual_unchecked(theta, &obs)?;
        for (j, &xj) in obs.x.iter().enumerate() {
            s[j] += xj * r;
        }
    }
    Ok(s / (data.n() as f64 * model.dispersion(theta)))
}

fn newton(model: &ModelSpec, data: &Dataset, opts: FitOptions) -> Result<(ParamPoint, usize)> {
    let mut theta = ParamPoint::from_vector(starting_point(model, data), None);
    let mut loglik = model.log_kernel(&theta, data)?;
    let mut score_norm = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let score = mean_score(model, &theta, data)?;
        score_norm = score.amax();
        if score_norm < opts.tol {
            return Ok((theta, iter));
        }
        let fisher = model.fisher_and_meat(&theta, data)?.fisher;
        let step = SpdFactor::new_unchecked(&fisher, "Newton Hessian")?.solve_vec(&score);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = ParamPoint::from_vector(&theta.beta + &step * scale, None);
            if let Ok(ll) = model.log_kernel(&cand, data) {
                if ll >= loglik - 1e-12 * loglik.abs().max(1.0) {
                    theta = cand;
                    loglik = ll;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        let max_abs = theta.beta.amax();
        if max_abs > DIVERGENCE_BOUND {
            return Err(Error::Divergence(max_abs));
        }
        if !accepted {
            // no ascent direction left within floating precision
            let score = mean_score(model, &theta, data)?;
            score_norm = score.amax();
            if score_norm < opts.tol.max(1e-6) {
                return Ok((theta, iter + 1));
            }
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                score_norm,
            });
        }
    }
    let score = mean_score(model, &theta, data)?;
    if score.amax() < opts.tol {
        return Ok((theta, opts.max_iter));
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        score_norm: score_norm.min(score.amax()),
    })
}

fn finish(
    model: &ModelSpec,
    data: &Dataset,
    theta: ParamPoint,
    iterations: usize,
) -> Result<FreqFit> {
    let fm = model.fisher_and_meat(&theta, data)?;
    let n = data.n() as f64;
    let model_cov = SpdFactor::new(&fm.fisher, "empirical Fisher information at the MLE")?
        .inverse()
        / n;
    let model_cov = symmetrize(&model_cov);
    let sandwich_cov = sandwich_from_parts(&fm.fisher, &fm.meat, data.n())?;
    Ok(FreqFit {
        model_se: model_cov.diagonal().map(f64::sqrt),
        robust_se: sandwich_cov.diagonal().map(f64::sqrt),
        model_cov,
        sandwich_cov,
        theta_mle: theta,
        converged: true,
        iterations,
    })
}

fn sandwich_from_parts(fisher: &DMatrix<f64>, meat: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let f = SpdFactor::new(fisher, "empirical Fisher information at the MLE")?;
    let left = f.solve_mat(meat);
    let both = f.solve_mat(&left.transpose());
    Ok(symmetrize(&both) / n as f64)
}

/// `(1/n) Iₙ(θ̂)⁻¹ [(1/n) Σ l̇ᵢ l̇ᵢᵀ] Iₙ(θ̂)⁻¹`, the HC0 estimate of `Var(θ̂)`.
pub fn sandwich(model: &ModelSpec, fit: &FreqFit, data: &Dataset) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::InvalidParameter(
            "sandwich needs a converged fit".into(),
        ));
    }
    model.validate_data(data)?;
    model.validate_theta(&fit.theta_mle, data.p())?;
    let fm = model.fisher_and_meat(&fit.theta_mle, data)?;
    sandwich_from_parts(&fm.fisher, &fm.meat, data.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ols_matches_normal_equations() {
        let data = Dataset::new(
            vec![0.0, 1.0, 3.0],
            vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]],
        )
        .unwrap();
        let fit = fit_mle(&ModelSpec::linear(), &data, FitOptions::default()).unwrap();
        // independent 2x2 solve: X'X = [[3,3],[3,5]], X'y = (4, 7)
        let det = 3.0 * 5.0 - 3.0 * 3.0;
        let b0 = (5.0 * 4.0 - 3.0 * 7.0) / det;
        let b1 = (3.0 * 7.0 - 3.0 * 4.0) / det;
        assert_relative_eq!(fit.theta_mle.beta[0], b0, epsilon = 1e-12);
        assert_relative_eq!(fit.theta_mle.beta[1], b1, epsilon = 1e-12);
        let rss: f64 = [(0.0, 0.0), (1.0, 1.0), (3.0, 2.0)]
            .iter()
            .map(|(y, u)| (y - b0 - b1 * u) * (y - b0 - b1 * u))
            .sum();
        assert_relative_eq!(fit.theta_mle.sigma2.unwrap(), rss / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_intercept_only_is_log_mean() {
        let data = Dataset::intercept_only(vec![1.0, 2.0, 3.0]).unwrap();
        let fit = fit_mle(&ModelSpec::poisson(), &data, FitOptions::default()).unwrap();
        assert_relative_eq!(fit.theta_mle.beta[0], 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn exp_ph_intercept_only_rate() {
        let data =
            Dataset::survival(vec![1.0, 1.0, 2.0], vec![true; 3], vec![vec![1.0]; 3]).unwrap();
        let fit = fit_mle(&ModelSpec::exponential_ph(), &data, FitOptions::default()).unwrap();
        assert_relative_eq!(fit.theta_mle.beta[0], (3.0f64 / 4.0).ln(), epsilon = 1e-10);
    }

    #[test]
    fn hand_computed_sandwich() {
        let data = Dataset::intercept_only(vec![0.0, 2.0]).unwrap();
        let fit = fit_mle(&ModelSpec::linear(), &data, FitOptions::default()).unwrap();
        assert_relative_eq!(fit.theta_mle.beta[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(fit.theta_mle.sigma2.unwrap(), 1.0, epsilon = 1e-15);
        let s = sandwich(&ModelSpec::linear(), &fit, &data).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_rejected() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]],
        )
        .unwrap();
        assert!(matches!(
            fit_mle(&ModelSpec::linear(), &data, FitOptions::default()),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn separated_poisson_is_flagged() {
        // all counts zero on one side: the MLE intercept runs off to -infinity
        let data = Dataset::new(
            vec![0.0, 0.0, 0.0, 5.0, 6.0, 7.0],
            vec![
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![1.0, 1.0],
                vec![1.0, 1.0],
            ],
        )
        .unwrap();
        let res = fit_mle(
            &ModelSpec::poisson(),
            &data,
            FitOptions {
                tol: 1e-8,
                max_iter: 200,
            },
        );
        match res {
            Err(_) => {}
            Ok(fit) => assert!(fit.model_se[0] > 100.0, "se = {}", fit.model_se[0]),
        }
    }
}
