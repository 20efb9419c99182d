use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{generate, DgpKind, DgpSpec};
use super::kl::{kl_point, KlPoint};
use crate::error::{Error, Result};
use crate::freq::{fit_mle, FitOptions};
use crate::mcmc::{sample_posterior_from, McmcConfig};
use crate::prior::PriorSpec;
use crate::robust::{estimate, z_value};
use crate::seed;

/// Index of the slope coefficient in the `(1, U)` design.
pub const SLOPE: usize = 1;
/// Scenarios with a larger share of failed replicates are marked invalid.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Stable label; replicate seeds are derived from it.
    pub scenario_id: String,
    pub dgp: DgpSpec,
    pub n_reps: usize,
    pub mcmc: McmcConfig,
    pub seed: u64,
    pub level: f64,
    /// Defaults to `βⱼ ~ N(0, 10³)`, plus `σ⁻² ~ Gamma(0.1, 0.1)` for the
    /// linear model.
    pub prior: Option<PriorSpec>,
    /// Keep per-replicate results in the report.
    pub keep_replicates: bool,
}

impl SimConfig {
    pub fn new(scenario_id: impl Into<String>, dgp: DgpSpec) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            dgp,
            n_reps: 1000,
            mcmc: McmcConfig::simulation(),
            seed: 1,
            level: 0.95,
            prior: None,
            keep_replicates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        z_value(self.level)?;
        self.mcmc.validate()?;
        self.dgp.validate()
    }

    fn prior(&self) -> PriorSpec {
        self.prior.clone().unwrap_or_else(|| match self.dgp.kind {
            DgpKind::LinearQuadratic { .. } | DgpKind::FixedDesignLinearQuadratic { .. } => {
                PriorSpec::simulation_default(2)
            }
            _ => PriorSpec::normal(2, 0.0, 1e3),
        })
    }

    fn replicate_seed(&self, rep: usize) -> u64 {
        seed::derive(self.seed, &[seed::label_hash(&self.scenario_id), rep as u64])
    }
}

/// Slope summaries from one simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub rep: usize,
    pub d_hat: f64,
    pub post_sd: f64,
    pub brse: f64,
    pub mle: f64,
    pub robust_se: f64,
    pub covered_credible: bool,
    pub covered_freq_robust: bool,
    pub covered_bayes_robust: bool,
    pub events: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario_id: String,
    pub dgp: DgpSpec,
    pub correctly_specified: bool,
    pub n_reps: usize,
    pub ave_d_hat: f64,
    /// Monte Carlo standard deviation of `d̂`; absent with fewer than two
    /// successful replicates.
    pub se_d_hat: Option<f64>,
    pub ave_post_sd: f64,
    pub ave_brse: f64,
    pub ave_robust_se: f64,
    pub coverage_credible: f64,
    pub coverage_freq_robust: f64,
    pub coverage_bayes_robust: f64,
    /// Slope of the minimal Kullback-Leibler point.
    pub kl_point: f64,
    pub kl_point_se: Option<f64>,
    pub n_failed_reps: usize,
    pub ave_events: Option<f64>,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<ReplicateResult>>,
}

/// Runs every replicate of a random-design scenario.
pub fn run_scenario(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let kl = kl_point(&cfg.dgp, &cfg.dgp.kind.working_model())?;
    run_scenario_with_kl(cfg, &kl)
}

/// [`run_scenario`] restricted to fixed-design scenarios.
pub fn run_fixed_design(cfg: &SimConfig) -> Result<SimReport> {
    if !matches!(cfg.dgp.kind, DgpKind::FixedDesignLinearQuadratic { .. }) {
        return Err(Error::Config(
            "run_fixed_design needs a fixed-design scenario".into(),
        ));
    }
    run_scenario(cfg)
}

/// [`run_scenario`] with a precomputed minimal KL point.
pub fn run_scenario_with_kl(cfg: &SimConfig, kl: &KlPoint) -> Result<SimReport> {
    cfg.validate()?;
    let results: Vec<(usize, Result<ReplicateResult>)> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| (rep, run_replicate(cfg, kl, rep)))
        .collect();
    aggregate(cfg, kl, results)
}

/// Simulates and analyses replicate `rep`.
pub fn run_replicate(cfg: &SimConfig, kl: &KlPoint, rep: usize) -> Result<ReplicateResult> {
    let model = cfg.dgp.kind.working_model();
    let prior = cfg.prior();
    let rep_seed = cfg.replicate_seed(rep);
    let data = generate(&cfg.dgp, seed::derive(rep_seed, &[0]))?;
    let fit = fit_mle(&model, &data, FitOptions::default())?;
    let mcmc = cfg.mcmc.clone().with_seed(seed::derive(rep_seed, &[1]));
    let sample = sample_posterior_from(&model, &prior, &data, &mcmc, &fit)?;
    let res = estimate(&model, &sample, &data, cfg.level)?;
    res.check()?;
    let z = z_value(cfg.level)?;
    let target = kl.slope();
    let iv = res.intervals[SLOPE];
    let mle = fit.theta_mle.beta[SLOPE];
    let robust_se = fit.robust_se[SLOPE];
    Ok(ReplicateResult {
        rep,
        d_hat: res.d_hat[SLOPE],
        post_sd: res.post_sd[SLOPE],
        brse: res.brse[SLOPE],
        mle,
        robust_se,
        covered_credible: iv.credible.contains(target),
        covered_freq_robust: (mle - target).abs() <= z * robust_se,
        covered_bayes_robust: iv.robust.contains(target),
        events: data.event_count(),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn rate(v: &[ReplicateResult], f: impl Fn(&ReplicateResult) -> bool) -> f64 {
    v.iter().filter(|r| f(r)).count() as f64 / v.len() as f64
}

/// Ordered reduction of replicate outcomes; the input order is irrelevant.
pub fn aggregate(
    cfg: &SimConfig,
    kl: &KlPoint,
    mut results: Vec<(usize, Result<ReplicateResult>)>,
) -> Result<SimReport> {
    results.sort_by_key(|(rep, _)| *rep);
    let n_failed = results.iter().filter(|(_, r)| r.is_err()).count();
    let ok: Vec<ReplicateResult> = results.into_iter().filter_map(|(_, r)| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::Config(format!(
            "every replicate of scenario {} failed",
            cfg.scenario_id
        )));
    }
    let ave_d_hat = mean(ok.iter().map(|r| r.d_hat));
    let se_d_hat = (ok.len() > 1).then(|| {
        let ss: f64 = ok.iter().map(|r| (r.d_hat - ave_d_hat).powi(2)).sum();
        (ss / (ok.len() - 1) as f64).sqrt()
    });
    let ave_events = ok[0]
        .events
        .is_some()
        .then(|| mean(ok.iter().map(|r| r.events.unwrap_or(0) as f64)));
    Ok(SimReport {
        scenario_id: cfg.scenario_id.clone(),
        dgp: cfg.dgp,
        correctly_specified: cfg.dgp.kind.correctly_specified(),
        n_reps: cfg.n_reps,
        ave_d_hat,
        se_d_hat,
        ave_post_sd: mean(ok.iter().map(|r| r.post_sd)),
        ave_brse: mean(ok.iter().map(|r| r.brse)),
        ave_robust_se: mean(ok.iter().map(|r| r.robust_se)),
        coverage_credible: rate(&ok, |r| r.covered_credible),
        coverage_freq_robust: rate(&ok, |r| r.covered_freq_robust),
        coverage_bayes_robust: rate(&ok, |r| r.covered_bayes_robust),
        kl_point: kl.slope(),
        kl_point_se: kl.mc_se.as_ref().map(|s| s[SLOPE]),
        n_failed_reps: n_failed,
        ave_events,
        valid: n_failed as f64 <= MAX_FAILED_FRACTION * cfg.n_reps as f64,
        replicates: cfg.keep_replicates.then_some(ok),
    })
}
