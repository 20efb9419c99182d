use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Exact Bayes rules for a normal mean with known variance under a normal
/// prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalMeanRules {
    pub d_hat: f64,
    pub omega_hat: f64,
    pub sigma2_hat: f64,
    pub posterior_var: f64,
}

/// Unit sampling variance, prior `N(mu, eta2)`:
///
/// * `d̂ = (μ + nη²Ȳ) / (nη² + 1)`
/// * `ω̂ = (1/n) Σ (Yᵢ − Ȳ)² + η²/(nη² + 1) + ((μ − Ȳ)/(nη² + 1))²`
/// * `σ̂² = ω̂ · η²/(nη² + 1)`
pub fn closed_form_normal_mean(data: &Dataset, mu: f64, eta2: f64) -> Result<NormalMeanRules> {
    closed_form_normal_mean_with_variance(data, mu, eta2, 1.0)
}

/// Same as [`closed_form_normal_mean`] for sampling variance `s2`.
pub fn closed_form_normal_mean_with_variance(
    data: &Dataset,
    mu: f64,
    eta2: f64,
    s2: f64,
) -> Result<NormalMeanRules> {
    if data.n() == 0 {
        return Err(Error::EmptyData);
    }
    if !(eta2 > 0.0 && s2 > 0.0) {
        return Err(Error::InvalidParameter(
            "prior and sampling variances must be positive".into(),
        ));
    }
    let y = data.y();
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let ss = y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / n;
    // scale to unit variance: y/s, mu/s, eta2/s2
    let e = eta2 / s2;
    let denom = n * e + 1.0;
    let d_hat = (mu + n * eta2 / s2 * ybar) / denom;
    let posterior_var = eta2 / denom;
    let omega_hat = (ss + posterior_var + (ybar - d_hat) * (ybar - d_hat)) / s2;
    Ok(NormalMeanRules {
        d_hat,
        omega_hat,
        sigma2_hat: omega_hat * posterior_var,
        posterior_var,
    })
}
