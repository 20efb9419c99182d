use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{ChainDraws, McmcConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, SpdFactor};
use crate::model::{Dataset, ModelSpec};
use crate::prior::PriorSpec;

/// Exact draws from the normal posterior of `N(θ, s²)` data under a
/// `N(μ, η²)` prior.
pub(super) fn conjugate_normal_mean<R: Rng>(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    let var = model.assumed_variance();
    let n = data.n() as f64;
    let sum: f64 = data.y().iter().sum();
    let precision = 1.0 / prior.beta_var[0] + n / var;
    let mean = (prior.beta_mean[0] / prior.beta_var[0] + sum / var) / precision;
    let sd = precision.recip().sqrt();
    let iterations: Vec<usize> = (0..cfg.n_iter).filter(|&i| cfg.keeps(i)).collect();
    let beta = iterations
        .iter()
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            DVector::from_element(1, mean + sd * z)
        })
        .collect();
    Ok(ChainDraws {
        beta,
        sigma2: None,
        iterations,
        acceptance: None,
    })
}

/// Two-block Gibbs sampler for `y ~ N(Xβ, σ²)`, `β ~ N(m, diag(v))`,
/// `σ² ~ InvGamma(a, b)`.
pub(super) fn linear_gibbs<R: Rng>(
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<ChainDraws> {
    let ig = prior
        .sigma2
        .ok_or_else(|| Error::InvalidParameter("missing sigma2 prior".into()))?;
    let p = data.p();
    let n = data.n();
    let gram = data.gram();
    let xty = data.xty();
    let prior_prec = DMatrix::from_diagonal(&prior.beta_var.map(|v| 1.0 / v));
    let prior_shift = prior.beta_mean.component_div(&prior.beta_var);
    let shape = ig.shape + 0.5 * n as f64;
    let yty: f64 = data.y().iter().map(|v| v * v).sum();
    // yᵀy − 2βᵀXᵀy + βᵀXᵀXβ; the direct pass is used when it is cheaper
    let rss_of = |beta: &DVector<f64>| {
        if p * p < n {
            (yty - 2.0 * beta.dot(&xty) + beta.dot(&(&gram * beta))).max(0.0)
        } else {
            rss(data, beta)
        }
    };

    // start at least squares
    let ols = SpdFactor::new(&gram, "X'X")?.solve_vec(&xty);
    let mut beta = ols;
    let mut sigma2 = (rss(data, &beta) / n as f64).max(1e-12);

    let keep = cfg.retained_per_chain();
    let mut out_beta = Vec::with_capacity(keep);
    let mut out_s2 = Vec::with_capacity(keep);
    let mut iterations = Vec::with_capacity(keep);
    let mut z = DVector::zeros(p);

    for iter in 0..cfg.n_iter {
        // β | σ², y ~ N(Q⁻¹ b, Q⁻¹)
        let q = &gram / sigma2 + &prior_prec;
        let b = &xty / sigma2 + &prior_shift;
        let factor = SpdFactor::new_unchecked(&q, "beta full-conditional precision")?;
        let centre = factor.solve_vec(&b);
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(rng);
        }
        let l = factor.l();
        let offset = l
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
        beta = centre + offset;

        // σ² | β, y ~ InvGamma(a + n/2, b + RSS/2)
        let rate = ig.rate + 0.5 * rss_of(&beta);
        let precision: f64 = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        sigma2 = 1.0 / precision;

        if cfg.keeps(iter) {
            out_beta.push(beta.clone());
            out_s2.push(sigma2);
            iterations.push(iter);
        }
    }
    Ok(ChainDraws {
        beta: out_beta,
        sigma2: Some(out_s2),
        iterations,
        acceptance: None,
    })
}

fn rss(data: &Dataset, beta: &DVector<f64>) -> f64 {
    data.iter()
        .map(|o| {
            let r = o.y - dot(beta.as_slice(), o.x);
            r * r
        })
        .sum()
}
