use std::fmt::Write as _;

use brse_core::mcmc::Diagnostics;
use brse_core::robust::quantile_credible_intervals;
use brse_core::sim::table::markdown_table;
use brse_core::{
    estimate, fit_mle, sample_posterior_from, FitOptions, McmcConfig, ModelSpec, PosteriorSample,
    PriorSpec,
};
use serde::Serialize;

use crate::args::Format;
use crate::error::{CliError, Result};
use crate::ingest::Ingested;

#[derive(Clone, Debug)]
pub struct FitSettings {
    pub model: ModelSpec,
    pub prior: PriorSpec,
    pub mcmc: McmcConfig,
    pub level: f64,
    pub quantile_credible: bool,
}

/// One coefficient: frequentist estimate and standard errors, then the
/// Bayesian counterparts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub robust_se: f64,
    pub post_mean: f64,
    pub post_sd: f64,
    pub brse: f64,
    pub credible: [f64; 2],
    pub robust_interval: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile_credible: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McmcSummary {
    pub chains: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub retained_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub model: String,
    pub outcome: String,
    pub n: usize,
    pub rows_dropped: usize,
    pub level: f64,
    pub terms: Vec<TermRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_post_mean: Option<f64>,
    pub omega_hat: Vec<Vec<f64>>,
    pub mcmc: McmcSummary,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

pub const CSV_COLUMNS: [&str; 7] = [
    "term",
    "estimate",
    "se",
    "robust_se",
    "post_mean",
    "post_sd",
    "brse",
];

const MARKDOWN_COLUMNS: [&str; 7] = [
    "Term",
    "Est.",
    "SE",
    "Robust SE",
    "Post. mean",
    "Post. SD",
    "BRSE",
];

pub fn run_fit(input: &Ingested, s: &FitSettings) -> Result<(FitReport, PosteriorSample)> {
    let data = &input.data;
    if s.model.family() == brse_core::Family::NormalMeanKnownVar && data.p() != 1 {
        return Err(CliError::Usage(
            "the normal-mean model takes no covariates and needs the intercept".into(),
        ));
    }
    let freq = fit_mle(&s.model, data, FitOptions::default())?;
    let sample = sample_posterior_from(&s.model, &s.prior, data, &s.mcmc, &freq)?;
    let res = estimate(&s.model, &sample, data, s.level)?;
    res.check()?;
    let quantiles = if s.quantile_credible {
        Some(quantile_credible_intervals(&sample, s.level)?)
    } else {
        None
    };
    let terms = input
        .terms
        .iter()
        .enumerate()
        .map(|(j, term)| {
            let iv = res.intervals[j];
            TermRow {
                term: term.clone(),
                estimate: freq.theta_mle.beta[j],
                se: freq.model_se[j],
                robust_se: freq.robust_se[j],
                post_mean: res.d_hat[j],
                post_sd: res.post_sd[j],
                brse: res.brse[j],
                credible: [iv.credible.lo, iv.credible.hi],
                robust_interval: [iv.robust.lo, iv.robust.hi],
                quantile_credible: quantiles.as_ref().map(|q| [q[j].lo, q[j].hi]),
            }
        })
        .collect();
    let sigma2_post_mean = sample
        .sigma2_draws()
        .map(|d| d.iter().sum::<f64>() / d.len() as f64);
    let p = data.p();
    let omega_hat = (0..p)
        .map(|i| (0..p).map(|j| res.omega_hat[(i, j)]).collect())
        .collect();
    let report = FitReport {
        model: s.model.family().to_string(),
        outcome: input.outcome.clone(),
        n: data.n(),
        rows_dropped: input.dropped.len(),
        level: s.level,
        terms,
        sigma2_post_mean,
        omega_hat,
        mcmc: McmcSummary {
            chains: s.mcmc.n_chains,
            iterations: s.mcmc.n_iter,
            burnin: s.mcmc.n_burnin,
            thin: s.mcmc.thin,
            seed: s.mcmc.seed,
            retained_draws: sample.n_draws(),
        },
        diagnostics: sample.diagnostics.clone(),
        warnings: input.warnings(),
    };
    Ok((report, sample))
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn rows(r: &FitReport) -> (Vec<Vec<String>>, bool) {
    let quant = r.terms.iter().any(|t| t.quantile_credible.is_some());
    let body = r
        .terms
        .iter()
        .map(|t| {
            let mut row = vec![
                t.term.clone(),
                f3(t.estimate),
                f3(t.se),
                f3(t.robust_se),
                f3(t.post_mean),
                f3(t.post_sd),
                f3(t.brse),
            ];
            if let Some([lo, hi]) = t.quantile_credible {
                row.push(f3(lo));
                row.push(f3(hi));
            }
            row
        })
        .collect();
    (body, quant)
}

fn footer(r: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# model: {}, outcome: {}, n = {}, rows dropped = {}, level = {}",
        r.model, r.outcome, r.n, r.rows_dropped, r.level
    );
    let m = &r.mcmc;
    let _ = writeln!(
        s,
        "# mcmc: {} chains x {} iterations, burn-in {}, thin {}, seed {}, {} retained draws",
        m.chains, m.iterations, m.burnin, m.thin, m.seed, m.retained_draws
    );
    if let Some(v) = r.sigma2_post_mean {
        let _ = writeln!(s, "# sigma2 posterior mean: {v:.3}");
    }
    let mut names: Vec<String> = r.terms.iter().map(|t| t.term.clone()).collect();
    if r.sigma2_post_mean.is_some() {
        names.push("sigma2".into());
    }
    let join = |v: &[f64], digits: usize| {
        names
            .iter()
            .zip(v)
            .map(|(n, x)| format!("{n}={x:.digits$}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "# rhat: {}", join(&r.diagnostics.rhat, 3));
    let _ = writeln!(s, "# ess: {}", join(&r.diagnostics.ess, 0));
    if let Some(acc) = &r.diagnostics.acceptance_rate {
        let list: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
        let _ = writeln!(s, "# acceptance: {}", list.join(" "));
    }
    for w in &r.diagnostics.warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    for w in &r.warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    s
}

pub fn render_fit(r: &FitReport, format: Format) -> Result<String> {
    let (body, quant) = rows(r);
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).map_err(brse_core::Error::from)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut head: Vec<&str> = CSV_COLUMNS.to_vec();
            if quant {
                head.extend(["q_lo", "q_hi"]);
            }
            let csv_err = |e: csv::Error| CliError::from(brse_core::Error::from(e));
            w.write_record(&head).map_err(csv_err)?;
            for row in &body {
                w.write_record(row).map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::io("cannot render CSV", e.into_error()))?;
            Ok(String::from_utf8_lossy(&bytes).into_owned() + &footer(r))
        }
        Format::Markdown => {
            let mut head: Vec<String> = MARKDOWN_COLUMNS.iter().map(|s| s.to_string()).collect();
            if quant {
                head.extend(["Q lo".to_string(), "Q hi".to_string()]);
            }
            Ok(markdown_table(&head, &body) + "\n" + &footer(r))
        }
    }
}
