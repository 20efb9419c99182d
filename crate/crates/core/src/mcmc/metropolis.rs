use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ChainDraws, McmcConfig};
use crate::error::Result;
use crate::freq::FreqFit;
use crate::linalg::SpdFactor;
use crate::model::{Dataset, ModelSpec, ParamPoint};
use crate::prior::PriorSpec;

/// Running mean and covariance (Welford).
struct RunningCov {
    count: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl RunningCov {
    fn new(p: usize) -> Self {
        Self {
            count: 0.0,
            mean: DVector::zeros(p),
            m2: DMatrix::zeros(p, p),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.count += 1.0;
        let delta = x - &self.mean;
        self.mean += &delta / self.count;
        let delta2 = x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn cov(&self) -> DMatrix<f64> {
        let c = &self.m2 / (self.count - 1.0);
        crate::linalg::symmetrize(&c)
    }
}

struct Target<'a> {
    model: &'a ModelSpec,
    prior: &'a PriorSpec,
    data: &'a Dataset,
}

impl Target<'_> {
    /// Unnormalised log posterior; proposals whose linear predictor
    /// overflows get zero density.
    fn log_density(&self, beta: &DVector<f64>) -> f64 {
        let theta = ParamPoint::from_vector(beta.clone(), None);
        match self.model.log_kernel(&theta, self.data) {
            Ok(ll) if ll.is_finite() => ll + self.prior.ln_density(&theta),
            _ => f64::NEG_INFINITY,
        }
    }
}

fn cholesky_lower(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    SpdFactor::new_unchecked(cov, "proposal covariance")
        .ok()
        .map(|f| f.l())
}

/// Random-walk Metropolis on `β`. The proposal covariance starts at
/// `2.38²/p · (n Iₙ(β̂))⁻¹` and, during burn-in only, is replaced by the
/// running covariance of the burn-in draws while a global log-scale chases
/// the target acceptance rate. After burn-in the kernel is fixed.
pub(super) fn adaptive_rwm<R: Rng>(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    start: &FreqFit,
    rng: &mut R,
) -> Result<ChainDraws> {
    let p = data.p();
    let target = Target { model, prior, data };
    let base = 2.38 * 2.38 / p as f64;
    let init_cov = &start.model_cov;
    let mut chol = cholesky_lower(&(init_cov * base))
        .unwrap_or_else(|| DMatrix::identity(p, p) * 1e-3);

    // start from an approximate posterior draw around the MLE
    let mut z = DVector::zeros(p);
    for zj in z.iter_mut() {
        *zj = StandardNormal.sample(rng);
    }
    let init_l = cholesky_lower(init_cov).unwrap_or_else(|| DMatrix::identity(p, p) * 1e-3);
    let mut current = &start.theta_mle.beta + &init_l * &z;
    let mut current_lp = target.log_density(&current);
    if !current_lp.is_finite() {
        current = start.theta_mle.beta.clone();
        current_lp = target.log_density(&current);
    }

    let mut log_scale = 0.0f64;
    let mut window_accepts = 0usize;
    let mut windows = 0usize;
    let mut history = RunningCov::new(p);
    let min_history = (20 * p).max(cfg.adapt_window);

    let keep = cfg.retained_per_chain();
    let mut out = Vec::with_capacity(keep);
    let mut iterations = Vec::with_capacity(keep);
    let mut post_accepts = 0usize;
    let mut post_total = 0usize;

    for iter in 0..cfg.n_iter {
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(rng);
        }
        let proposal = &current + (&chol * &z) * log_scale.exp();
        let proposal_lp = target.log_density(&proposal);
        let log_u: f64 = rng.gen::<f64>().ln();
        let accepted = proposal_lp.is_finite() && log_u < proposal_lp - current_lp;
        if accepted {
            current = proposal;
            current_lp = proposal_lp;
        }

        if iter < cfg.n_burnin {
            window_accepts += usize::from(accepted);
            // the first quarter of burn-in is treated as transient
            if iter >= cfg.n_burnin / 4 {
                history.push(&current);
            }
            if (iter + 1) % cfg.adapt_window == 0 {
                windows += 1;
                let rate = window_accepts as f64 / cfg.adapt_window as f64;
                let gain = 1.0 / (windows as f64).sqrt();
                log_scale += gain * (rate - cfg.target_acceptance) * 2.0;
                log_scale = log_scale.clamp(-10.0, 5.0);
                window_accepts = 0;
                if history.count as usize >= min_history {
                    if let Some(l) = cholesky_lower(&(history.cov() * base)) {
                        chol = l;
                    }
                }
            }
        } else {
            post_total += 1;
            post_accepts += usize::from(accepted);
        }

        if cfg.keeps(iter) {
            out.push(current.clone());
            iterations.push(iter);
        }
    }
    Ok(ChainDraws {
        beta: out,
        sigma2: None,
        iterations,
        acceptance: Some(post_accepts as f64 / post_total.max(1) as f64),
    })
}
