use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{GeneralFactor, SpdFactor};
use crate::model::{Dataset, ModelSpec, ParamPoint};

/// A loss value split into its additive parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossValue {
    pub total: f64,
    pub logdet_term: f64,
    pub estimation_term: f64,
    /// Zero for the plain inference loss.
    pub lack_of_fit_term: f64,
}

impl LossValue {
    fn new(logdet_term: f64, estimation_term: f64, lack_of_fit_term: f64) -> Self {
        Self {
            total: logdet_term + estimation_term + lack_of_fit_term,
            logdet_term,
            estimation_term,
            lack_of_fit_term,
        }
    }
}

fn check_len(theta: &ParamPoint, d: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<()> {
    if theta.p() != d.len() || sigma.nrows() != d.len() {
        return Err(Error::Dimension(format!(
            "theta has p = {}, d has {}, Sigma is {}x{}",
            theta.p(),
            d.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// `log|Σ| + (θ − d)ᵀ Σ⁻¹ (θ − d)`.
pub fn inference_loss(theta: &ParamPoint, d: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<LossValue> {
    check_len(theta, d, sigma)?;
    let f = SpdFactor::new(sigma, "Sigma")?;
    let diff = &theta.beta - d;
    let quad = diff.dot(&f.solve_vec(&diff));
    Ok(LossValue::new(f.log_det(), quad, 0.0))
}

/// `log|Σ| + (θ − d)ᵀ Ω Σ⁻¹ (θ − d) + (1/n) Σᵢ l̇ᵢᵀ (Ω Iₙ(θ))⁻¹ l̇ᵢ`.
///
/// `Σ` and `Ω` only need a positive determinant and a bounded condition
/// number: the Bayes rules are products of symmetric matrices and are not
/// symmetric themselves at finite Monte Carlo size.
pub fn balanced_inference_loss(
    model: &ModelSpec,
    theta: &ParamPoint,
    d: &DVector<f64>,
    sigma: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    data: &Dataset,
) -> Result<LossValue> {
    check_len(theta, d, sigma)?;
    if omega.shape() != sigma.shape() {
        return Err(Error::Dimension("Omega and Sigma shapes differ".into()));
    }
    model.validate_data(data)?;
    model.validate_theta(theta, data.p())?;
    let sf = GeneralFactor::new(sigma, "Sigma")?;
    GeneralFactor::new(omega, "Omega")?;
    let diff = &theta.beta - d;
    let estimation = diff.dot(&(omega * sf.solve_vec(&diff)));

    let fisher = model.fisher_and_meat(theta, data)?.fisher;
    let scaled = GeneralFactor::new(&(omega * fisher), "Omega * I_n(theta)")?;
    let n = data.n();
    let alpha = model.dispersion(theta);
    let mut scores = DMatrix::zeros(data.p(), n);
    for (i, obs) in data.iter().enumerate() {
        let (r, _) = model.residual(theta, &obs)?;
        for (j, &x) in obs.x.iter().enumerate() {
            scores[(j, i)] = x * r / alpha;
        }
    }
    let solved = scaled.solve_mat(&scores);
    let lack = scores.component_mul(&solved).sum() / n as f64;
    Ok(LossValue::new(sf.log_det(), estimation, lack))
}

/// Lack-of-fit term written for canonical-link GLMs:
/// `Σᵢ (Yᵢ − μᵢ)²/α · Xᵢᵀ (Ω XᵀVX)⁻¹ Xᵢ`, i.e. squared Pearson residuals
/// weighted by a modified leverage.
pub fn glm_lack_of_fit(
    model: &ModelSpec,
    theta: &ParamPoint,
    omega: &DMatrix<f64>,
    data: &Dataset,
) -> Result<f64> {
    if !model.family().is_glm() {
        return Err(Error::Unsupported(format!(
            "the Pearson form needs a GLM family, got {}",
            model.family()
        )));
    }
    model.validate_data(data)?;
    model.validate_theta(theta, data.p())?;
    let p = data.p();
    let alpha = model.dispersion(theta);
    let mut xtvx = DMatrix::zeros(p, p);
    let mut pearson = Vec::with_capacity(data.n());
    for obs in data.iter() {
        let (mu, v) = model.mean_and_variance_fn(theta, &obs)?;
        let x = DVector::from_column_slice(obs.x);
        xtvx += &x * x.transpose() * v;
        pearson.push((obs.y - mu) * (obs.y - mu) / alpha);
    }
    let f = GeneralFactor::new(&(omega * xtvx), "Omega X'VX")?;
    let mut total = 0.0;
    for (obs, r2) in data.iter().zip(pearson) {
        let x = DVector::from_column_slice(obs.x);
        total += r2 * x.dot(&f.solve_vec(&x));
    }
    Ok(total)
}

/// Monte Carlo posterior expectation of [`balanced_inference_loss`] over the
/// rows of `draws`.
pub fn posterior_risk_bi(
    model: &ModelSpec,
    points: &[ParamPoint],
    d: &DVector<f64>,
    sigma: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    data: &Dataset,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for theta in points {
        total += balanced_inference_loss(model, theta, d, sigma, omega, data)?.total;
    }
    Ok(total / points.len() as f64)
}

/// Monte Carlo posterior expectation of [`inference_loss`].
pub fn posterior_risk_i(points: &[ParamPoint], d: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for theta in points {
        total += inference_loss(theta, d, sigma)?.total;
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inference_loss_examples() {
        let l = inference_loss(&ParamPoint::new(vec![0.3]), &DVector::from_vec(vec![0.3]), &DMatrix::identity(1, 1)).unwrap();
        assert_eq!(l.total, 0.0);
        let l = inference_loss(&ParamPoint::new(vec![1.0]), &DVector::from_vec(vec![0.0]), &DMatrix::identity(1, 1)).unwrap();
        assert_eq!(l.total, 1.0);
        let l = inference_loss(
            &ParamPoint::new(vec![1.0, 1.0]),
            &DVector::zeros(2),
            &(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        assert_relative_eq!(l.total, 2.0 * 2f64.ln() + 1.0, epsilon = 1e-14);
        assert_eq!(l.lack_of_fit_term, 0.0);
    }

    #[test]
    fn inference_loss_rejects_indefinite() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(inference_loss(&ParamPoint::new(vec![0.0, 0.0]), &DVector::zeros(2), &s).is_err());
    }

    #[test]
    fn normal_mean_balanced_loss_by_hand() {
        let model = ModelSpec::normal_mean(1.0).unwrap();
        let data = Dataset::intercept_only(vec![0.0, 2.0]).unwrap();
        let theta = ParamPoint::new(vec![1.0]);
        let one = DMatrix::identity(1, 1);
        let l = balanced_inference_loss(&model, &theta, &theta.beta, &one, &one, &data).unwrap();
        assert_relative_eq!(l.lack_of_fit_term, 1.0, epsilon = 1e-14);
        assert_relative_eq!(l.total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn exact_fit_has_no_lack_of_fit() {
        let model = ModelSpec::linear();
        let data = Dataset::new(
            vec![1.0, 3.0, 5.0],
            vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]],
        )
        .unwrap();
        let theta = ParamPoint::with_sigma2(vec![1.0, 2.0], 0.5);
        let id = DMatrix::identity(2, 2);
        let l = balanced_inference_loss(&model, &theta, &theta.beta, &id, &id, &data).unwrap();
        assert_eq!(l.lack_of_fit_term, 0.0);
    }
}
