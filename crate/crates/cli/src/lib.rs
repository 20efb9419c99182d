//! Front end for the `brse` binary: CSV ingestion, the fit report, and the
//! simulation and KL-point commands.

pub mod args;
pub mod config;
pub mod error;
pub mod fit;
pub mod ingest;
pub mod output;
pub mod simulate;

use std::ffi::OsString;

use brse_core::{Family, McmcConfig, ModelSpec, PriorSpec, Sigma2Prior};
use clap::Parser;

use args::{Cli, Command, FitArgs, McmcArgs, ModelArg};
use error::{CliError, Result};
use ingest::Formula;

pub use error::{EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

pub(crate) fn mcmc_config(base: McmcConfig, a: &McmcArgs) -> McmcConfig {
    McmcConfig {
        n_chains: a.chains.unwrap_or(base.n_chains),
        n_iter: a.iter.unwrap_or(base.n_iter),
        n_burnin: a.burnin.unwrap_or(base.n_burnin),
        thin: a.thin.unwrap_or(base.thin),
        seed: a.seed.unwrap_or(base.seed),
        target_acceptance: a.target_acceptance.unwrap_or(base.target_acceptance),
        ..base
    }
}

fn family(m: ModelArg) -> Family {
    match m {
        ModelArg::Linear => Family::LinearRegression,
        ModelArg::Poisson => Family::PoissonRegression,
        ModelArg::ExpPh => Family::ExponentialPh,
        ModelArg::NormalMean => Family::NormalMeanKnownVar,
    }
}

pub fn formula(a: &FitArgs) -> Formula {
    let survival = a.model == ModelArg::ExpPh;
    Formula {
        outcome: if survival { None } else { a.outcome.clone() },
        average: if survival { Vec::new() } else { a.average.clone() },
        covariates: a.covariates.clone(),
        intercept: !a.no_intercept,
        time: if survival { a.time.clone().or_else(|| Some("time".into())) } else { None },
        event: if survival { a.event.clone().or_else(|| Some("event".into())) } else { None },
    }
}

pub fn fit_settings(a: &FitArgs, p: usize) -> Result<fit::FitSettings> {
    let fam = family(a.model);
    let model = match fam {
        Family::NormalMeanKnownVar => ModelSpec::normal_mean(a.assumed_variance)?,
        f => ModelSpec::of(f),
    };
    let mut prior = PriorSpec::normal(p, a.prior_mean, a.prior_var);
    if model.has_sigma2() {
        prior = prior.with_sigma2(Sigma2Prior::InverseGamma {
            shape: a.sigma2_shape,
            rate: a.sigma2_rate,
        });
    }
    prior.validate()?;
    Ok(fit::FitSettings {
        model,
        prior,
        mcmc: mcmc_config(McmcConfig::default(), &a.mcmc),
        level: a.level,
        quantile_credible: a.quantile_credible,
    })
}

fn run_fit_command(a: &FitArgs) -> Result<()> {
    let input = ingest::ingest_csv(&a.data, &formula(a), a.strict)?;
    for w in input.warnings() {
        eprintln!("warning: {w}");
    }
    let settings = fit_settings(a, input.data.p())?;
    let (report, sample) = fit::run_fit(&input, &settings)?;
    for w in &report.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.dump_draws {
        let mut buf = Vec::new();
        sample.write_csv(&mut buf)?;
        output::write_atomic(path, &buf)?;
    }
    output::emit(&fit::render_fit(&report, a.out.format)?, a.out.output.as_deref())
}

/// Parses arguments (expanding `--config`), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match &cli.command {
        Command::Fit(a) => run_fit_command(a),
        Command::Simulate(a) => {
            let reports = simulate::run_simulate(a)?;
            output::emit(&simulate::render_reports(&reports, a.out.format)?, a.out.output.as_deref())
        }
        Command::KlPoint(a) => {
            let (s, kl) = simulate::run_kl(a)?;
            output::emit(&simulate::render_kl(&s, &kl, a.out.format)?, a.out.output.as_deref())
        }
    }
}
