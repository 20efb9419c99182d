//! Posterior sampling.
//!
//! * normal mean: exact conjugate draws,
//! * linear regression: two-block Gibbs (`β | σ²` then `σ² | β`),
//! * Poisson and exponential PH: random-walk Metropolis whose proposal
//!   covariance is adapted during burn-in and frozen afterwards.
//!
//! Chains get independent streams derived from the master seed and the chain
//! index, so a run is reproducible bit for bit regardless of thread count.

pub mod diagnostics;
mod gibbs;
mod metropolis;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{fit_mle, FitOptions, FreqFit};
use crate::linalg::{add_outer_lower, mirror_lower};
use crate::model::{Dataset, Family, ModelSpec, ParamPoint};
use crate::prior::PriorSpec;
use crate::seed;

pub use diagnostics::Diagnostics;

/// Split R̂ above this value attaches a warning to the sample.
pub const RHAT_WARNING: f64 = 1.1;
/// Fewer retained draws per chain than this attaches a warning.
pub const MIN_RETAINED_PER_CHAIN: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Metropolis acceptance rate targeted during burn-in.
    pub target_acceptance: f64,
    /// Burn-in iterations between proposal updates.
    pub adapt_window: usize,
}

impl Default for McmcConfig {
    /// Three chains of 30 000 iterations, the first 18 000 discarded.
    fn default() -> Self {
        Self {
            n_chains: 3,
            n_iter: 30_000,
            n_burnin: 18_000,
            thin: 1,
            seed: 20_240_101,
            target_acceptance: 0.35,
            adapt_window: 100,
        }
    }
}

impl McmcConfig {
    /// One chain of 6 000 iterations with 1 000 burn-in, used by the
    /// simulation campaigns.
    pub fn simulation() -> Self {
        Self {
            n_chains: 1,
            n_iter: 6_000,
            n_burnin: 1_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_iter == 0 || self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::Config(
                "chains, iterations, thin and adapt_window must be positive".into(),
            ));
        }
        if self.n_burnin >= self.n_iter {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.n_burnin, self.n_iter
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config(
                "target acceptance rate must lie in (0, 1)".into(),
            ));
        }
        if self.retained_per_chain() == 0 {
            return Err(Error::Config("no draws would be retained".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }

    /// Whether the (0-based) iteration is kept.
    #[inline]
    pub(crate) fn keeps(&self, iter: usize) -> bool {
        iter >= self.n_burnin && (iter - self.n_burnin + 1) % self.thin == 0
    }

    pub(crate) fn chain_seed(&self, chain: usize) -> u64 {
        seed::derive(self.seed, &[chain as u64])
    }
}

/// Retained draws of `β` (and `σ²`) pooled across chains.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSample {
    draws: DMatrix<f64>,
    sigma2_draws: Option<Vec<f64>>,
    chain_ids: Vec<usize>,
    iterations: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Output of one chain.
pub(crate) struct ChainDraws {
    pub beta: Vec<DVector<f64>>,
    pub sigma2: Option<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub acceptance: Option<f64>,
}

impl PosteriorSample {
    /// Builds a sample from raw rows. `chain_ids[i]` labels row `i`.
    pub fn new(
        draws: DMatrix<f64>,
        sigma2_draws: Option<Vec<f64>>,
        chain_ids: Vec<usize>,
    ) -> Result<Self> {
        let s = draws.nrows();
        if s == 0 || draws.ncols() == 0 {
            return Err(Error::InsufficientDraws { needed: 1, got: s });
        }
        if chain_ids.len() != s || sigma2_draws.as_ref().is_some_and(|v| v.len() != s) {
            return Err(Error::Dimension(
                "draw, sigma2 and chain label counts differ".into(),
            ));
        }
        if let Some(v) = &sigma2_draws {
            if v.iter().any(|&s2| !(s2 > 0.0)) {
                return Err(Error::InvalidParameter(
                    "sigma2 draws must be positive".into(),
                ));
            }
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("posterior draws".into()));
        }
        let iterations = {
            let mut seen = std::collections::HashMap::<usize, usize>::new();
            chain_ids
                .iter()
                .map(|c| {
                    let k = seen.entry(*c).or_default();
                    *k += 1;
                    *k - 1
                })
                .collect()
        };
        let mut sample = Self {
            draws,
            sigma2_draws,
            chain_ids,
            iterations,
            diagnostics: Diagnostics::default(),
        };
        sample.diagnostics = sample.compute_diagnostics(None);
        Ok(sample)
    }

    pub(crate) fn from_chains(chains: Vec<ChainDraws>, p: usize) -> Result<Self> {
        let total: usize = chains.iter().map(|c| c.beta.len()).sum();
        let mut draws = DMatrix::zeros(total, p);
        let mut sigma2 = chains[0].sigma2.as_ref().map(|_| Vec::with_capacity(total));
        let mut chain_ids = Vec::with_capacity(total);
        let mut iterations = Vec::with_capacity(total);
        let mut row = 0;
        for (c, chain) in chains.iter().enumerate() {
            for (k, b) in chain.beta.iter().enumerate() {
                draws.row_mut(row).copy_from(&b.transpose());
                chain_ids.push(c);
                iterations.push(chain.iterations[k]);
                row += 1;
            }
            if let (Some(out), Some(s)) = (sigma2.as_mut(), chain.sigma2.as_ref()) {
                out.extend_from_slice(s);
            }
        }
        let acceptance = chains
            .iter()
            .map(|c| c.acceptance)
            .collect::<Option<Vec<f64>>>();
        let mut sample = Self {
            draws,
            sigma2_draws: sigma2,
            chain_ids,
            iterations,
            diagnostics: Diagnostics::default(),
        };
        sample.diagnostics = sample.compute_diagnostics(acceptance);
        Ok(sample)
    }

    fn compute_diagnostics(&self, acceptance: Option<Vec<f64>>) -> Diagnostics {
        let n_chains = self.n_chains();
        let mut columns: Vec<Vec<f64>> = (0..self.p())
            .map(|j| self.draws.column(j).iter().copied().collect())
            .collect();
        if let Some(s2) = &self.sigma2_draws {
            columns.push(s2.clone());
        }
        let mut rhat = Vec::with_capacity(columns.len());
        let mut ess = Vec::with_capacity(columns.len());
        for col in &columns {
            let per_chain: Vec<Vec<f64>> = (0..n_chains)
                .map(|c| {
                    col.iter()
                        .zip(&self.chain_ids)
                        .filter(|(_, &id)| id == c)
                        .map(|(v, _)| *v)
                        .collect()
                })
                .filter(|v: &Vec<f64>| !v.is_empty())
                .collect();
            let refs: Vec<&[f64]> = per_chain.iter().map(Vec::as_slice).collect();
            rhat.push(diagnostics::split_rhat(&refs));
            ess.push(diagnostics::ess(&refs));
        }
        let mut warnings = Vec::new();
        for (j, r) in rhat.iter().enumerate() {
            if *r > RHAT_WARNING {
                warnings.push(format!(
                    "split R-hat {r:.3} > {RHAT_WARNING} for parameter {}",
                    self.parameter_name(j)
                ));
            }
        }
        let per_chain = self.n_draws() / n_chains.max(1);
        if per_chain < MIN_RETAINED_PER_CHAIN {
            warnings.push(format!(
                "only {per_chain} retained draws per chain (fewer than {MIN_RETAINED_PER_CHAIN})"
            ));
        }
        Diagnostics {
            rhat,
            ess,
            acceptance_rate: acceptance,
            warnings,
        }
    }

    pub fn parameter_name(&self, j: usize) -> String {
        if j < self.p() {
            format!("beta[{j}]")
        } else {
            "sigma2".to_string()
        }
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn p(&self) -> usize {
        self.draws.ncols()
    }

    pub fn n_chains(&self) -> usize {
        self.chain_ids.iter().max().map_or(0, |m| m + 1)
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn sigma2_draws(&self) -> Option<&[f64]> {
        self.sigma2_draws.as_deref()
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chain_ids
    }

    /// Draw `s` as a parameter point.
    pub fn point(&self, s: usize) -> ParamPoint {
        ParamPoint::from_vector(
            self.draws.row(s).transpose(),
            self.sigma2_draws.as_ref().map(|v| v[s]),
        )
    }

    /// Sample mean of the retained `β` draws.
    pub fn mean(&self) -> DVector<f64> {
        let s = self.n_draws() as f64;
        let mut m = DVector::zeros(self.p());
        for row in self.draws.row_iter() {
            m += row.transpose();
        }
        m / s
    }

    /// Sample covariance with denominator `S − 1`, exactly symmetric.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let s = self.n_draws();
        if s < 2 {
            return Err(Error::InsufficientDraws { needed: 2, got: s });
        }
        let m = self.mean();
        let p = self.p();
        let mut c = DMatrix::zeros(p, p);
        let mut centered = vec![0.0; p];
        for row in self.draws.row_iter() {
            for j in 0..p {
                centered[j] = row[j] - m[j];
            }
            add_outer_lower(&mut c, &centered, 1.0);
        }
        mirror_lower(&mut c);
        Ok(c / (s as f64 - 1.0))
    }

    /// Row-permuted copy; used to check that summaries do not depend on
    /// chain order.
    pub fn reorder_chains(&self, order: &[usize]) -> Result<Self> {
        let n_chains = self.n_chains();
        if order.len() != n_chains {
            return Err(Error::Dimension("chain permutation has wrong length".into()));
        }
        let mut rows = Vec::with_capacity(self.n_draws());
        let mut labels = Vec::with_capacity(self.n_draws());
        for (new_id, &old) in order.iter().enumerate() {
            for (i, &c) in self.chain_ids.iter().enumerate() {
                if c == old {
                    rows.push(i);
                    labels.push(new_id);
                }
            }
        }
        let draws = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.draws[(rows[i], j)]);
        let sigma2 = self
            .sigma2_draws
            .as_ref()
            .map(|v| rows.iter().map(|&i| v[i]).collect());
        Self::new(draws, sigma2, labels)
    }

    /// Writes one row per draw: `chain,iter,beta_0,…,beta_{p-1}[,sigma2]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend((0..self.p()).map(|j| format!("beta_{j}")));
        if self.sigma2_draws.is_some() {
            header.push("sigma2".into());
        }
        w.write_record(&header)?;
        for s in 0..self.n_draws() {
            let mut rec = vec![self.chain_ids[s].to_string(), self.iterations[s].to_string()];
            rec.extend(self.draws.row(s).iter().map(|v| format!("{v:?}")));
            if let Some(v) = &self.sigma2_draws {
                rec.push(format!("{:?}", v[s]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Exact byte representation of the sample, for reproducibility checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in self.draws.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(s2) = &self.sigma2_draws {
            for v in s2 {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for c in &self.chain_ids {
            out.extend_from_slice(&(*c as u64).to_le_bytes());
        }
        out
    }
}

/// Posterior mean of `β`.
pub fn posterior_mean(sample: &PosteriorSample) -> DVector<f64> {
    sample.mean()
}

/// Posterior covariance of `β` (denominator `S − 1`).
pub fn posterior_cov(sample: &PosteriorSample) -> Result<DMatrix<f64>> {
    sample.covariance()
}

fn validate_inputs(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
) -> Result<()> {
    cfg.validate()?;
    prior.validate()?;
    model.validate_data(data)?;
    if prior.p() != data.p() {
        return Err(Error::Dimension(format!(
            "prior has p = {}, data has p = {}",
            prior.p(),
            data.p()
        )));
    }
    data.check_full_rank()?;
    if model.has_sigma2() && prior.sigma2.is_none() {
        return Err(Error::InvalidParameter(
            "linear regression needs a sigma2 prior".into(),
        ));
    }
    Ok(())
}

/// Draws from the posterior of `model` under `prior`.
pub fn sample_posterior(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
) -> Result<PosteriorSample> {
    validate_inputs(model, prior, data, cfg)?;
    match model.family() {
        Family::PoissonRegression | Family::ExponentialPh => {
            let start = fit_mle(model, data, FitOptions::default())?;
            run_chains(model, prior, data, cfg, Some(&start))
        }
        _ => run_chains(model, prior, data, cfg, None),
    }
}

/// Like [`sample_posterior`] but reuses an existing MLE fit to initialise the
/// Metropolis chains.
pub fn sample_posterior_from(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    start: &FreqFit,
) -> Result<PosteriorSample> {
    validate_inputs(model, prior, data, cfg)?;
    run_chains(model, prior, data, cfg, Some(start))
}

fn run_chains(
    model: &ModelSpec,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
    start: Option<&FreqFit>,
) -> Result<PosteriorSample> {
    let chains: Vec<ChainDraws> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(cfg.chain_seed(c));
            match model.family() {
                Family::NormalMeanKnownVar => gibbs::conjugate_normal_mean(model, prior, data, cfg, &mut rng),
                Family::LinearRegression => gibbs::linear_gibbs(prior, data, cfg, &mut rng),
                Family::PoissonRegression | Family::ExponentialPh => {
                    let start = start.ok_or_else(|| {
                        Error::InvalidParameter("Metropolis sampler needs a starting fit".into())
                    })?;
                    metropolis::adaptive_rwm(model, prior, data, cfg, start, &mut rng)
                }
            }
        })
        .collect::<Result<_>>()?;
    PosteriorSample::from_chains(chains, data.p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_from_rows(rows: &[&[f64]], chains: Vec<usize>) -> PosteriorSample {
        let p = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PosteriorSample::new(DMatrix::from_row_slice(rows.len(), p, &flat), None, chains).unwrap()
    }

    #[test]
    fn two_point_mean_and_cov() {
        let s = sample_from_rows(&[&[0.0], &[2.0]], vec![0, 0]);
        assert_eq!(posterior_mean(&s)[0], 1.0);
        assert_eq!(posterior_cov(&s).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn identical_draws_have_zero_cov() {
        let s = sample_from_rows(&[&[1.5, -2.0], &[1.5, -2.0], &[1.5, -2.0]], vec![0; 3]);
        assert!(posterior_cov(&s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_draw_cov_errors() {
        let s = sample_from_rows(&[&[1.0]], vec![0]);
        assert!(matches!(
            posterior_cov(&s),
            Err(Error::InsufficientDraws { .. })
        ));
    }

    #[test]
    fn prng_sanity() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = seed::rng(99);
        let v: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = PosteriorSample::new(DMatrix::from_vec(v.len(), 1, v), None, vec![0; 100_000])
            .unwrap();
        assert!(posterior_mean(&s)[0].abs() < 0.02);
        assert!((posterior_cov(&s).unwrap()[(0, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn config_validation() {
        let mut cfg = McmcConfig::default();
        assert_eq!(cfg.retained_per_chain(), 12_000);
        cfg.n_burnin = cfg.n_iter;
        assert!(cfg.validate().is_err());
        let cfg = McmcConfig {
            target_acceptance: 1.0,
            ..McmcConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn few_draws_warn() {
        let s = sample_from_rows(&[&[0.0], &[1.0], &[0.5], &[0.2]], vec![0; 4]);
        assert!(s.diagnostics.warnings.iter().any(|w| w.contains("retained")));
    }

    #[test]
    fn chain_reordering_keeps_summaries() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let s = sample_from_rows(&refs, (0..30).map(|i| i / 10).collect());
        let r = s.reorder_chains(&[2, 0, 1]).unwrap();
        let (m1, m2) = (s.mean(), r.mean());
        for j in 0..2 {
            assert_relative_eq!(m1[j], m2[j], epsilon = 1e-14);
        }
        let (c1, c2) = (s.covariance().unwrap(), r.covariance().unwrap());
        for (a, b) in c1.iter().zip(c2.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn csv_dump_layout() {
        let s = PosteriorSample::new(
            DMatrix::from_row_slice(2, 1, &[0.5, 0.25]),
            Some(vec![1.0, 2.0]),
            vec![0, 1],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "chain,iter,beta_0,sigma2\n0,0,0.5,1.0\n1,0,0.25,2.0\n");
    }
}
