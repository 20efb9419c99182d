use brse_core::sim::{
    grid, kl_point, run_grid, table, CovariateLaw, DgpSpec, GridOptions, KlPoint, Scenario,
    SimReport,
};
use serde::Serialize;

use crate::args::{CovariatesArg, Format, KlArgs, ScenarioArg, ScenarioArgs, SimulateArgs};
use crate::error::{CliError, Result};
use crate::mcmc_config;

fn fmt_param(v: f64) -> String {
    format!("{}", v + 0.0)
}

/// Builds the scenario described by inline flags.
pub fn inline_scenario(s: &ScenarioArgs) -> Result<Scenario> {
    let kind = s
        .scenario
        .ok_or_else(|| CliError::Usage("name a --grid or an inline --scenario".into()))?;
    let n = s.n.unwrap_or(100);
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Usage(format!("this scenario needs --{flag}")))
    };
    let (id, mut dgp) = match kind {
        ScenarioArg::Linear => {
            let a = need(s.a, "a")?;
            (format!("inline/linear/n={n}/a={}", fmt_param(a)), DgpSpec::linear_quadratic(a, n))
        }
        ScenarioArg::Poisson => {
            let a = need(s.a, "a")?;
            (format!("inline/poisson/n={n}/a={}", fmt_param(a)), DgpSpec::poisson_quadratic(a, n))
        }
        ScenarioArg::Fixed => {
            let a = need(s.a, "a")?;
            (format!("inline/fixed/n={n}/a={}", fmt_param(a)), DgpSpec::fixed_design(a, n))
        }
        ScenarioArg::ExpPh => {
            let kappa = need(s.kappa, "kappa")?;
            let beta = need(s.beta, "beta")?;
            (
                format!("inline/exp-ph/n={n}/kappa={}/beta={}", fmt_param(kappa), fmt_param(beta)),
                DgpSpec::weibull_ph(kappa, beta, n),
            )
        }
    };
    if let Some(law) = s.covariates {
        if kind == ScenarioArg::Fixed {
            return Err(CliError::Usage("fixed designs do not take --covariates".into()));
        }
        dgp = dgp.with_covariates(match law {
            // the scenario's own uniform range
            CovariatesArg::Uniform => match dgp.covariate_law {
                u @ CovariateLaw::Uniform { .. } => u,
                _ => CovariateLaw::Uniform { lo: 0.0, hi: 3.0 },
            },
            CovariatesArg::Normal => CovariateLaw::StandardNormal,
        });
    }
    dgp.validate()?;
    Ok(Scenario { id, dgp })
}

pub fn scenarios(args: &SimulateArgs) -> Result<Vec<Scenario>> {
    match &args.grid {
        Some(name) => {
            if args.scenario.scenario.is_some() {
                return Err(CliError::Usage("--grid and --scenario are mutually exclusive".into()));
            }
            Ok(grid(name)?)
        }
        None => Ok(vec![inline_scenario(&args.scenario)?]),
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<Vec<SimReport>> {
    let list = scenarios(args)?;
    let opts = GridOptions {
        n_reps: args.reps,
        mcmc: mcmc_config(brse_core::McmcConfig::simulation(), &args.mcmc),
        seed: args.mcmc.seed.unwrap_or(1),
        level: args.level,
        keep_replicates: args.keep_replicates,
    };
    let total = list.len();
    let mut done = 0;
    let reports = run_grid(&list, &opts, |r| {
        done += 1;
        if !args.quiet {
            eprintln!(
                "[{done}/{total}] {}: coverage credible {:.3}, frequentist {:.3}, bayes {:.3}{}",
                r.scenario_id,
                r.coverage_credible,
                r.coverage_freq_robust,
                r.coverage_bayes_robust,
                if r.valid { "" } else { " (invalid: too many failed replicates)" }
            );
        }
    })?;
    Ok(reports)
}

pub fn render_reports(reports: &[SimReport], format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            table::write_csv(reports, &mut buf)?;
            String::from_utf8_lossy(&buf).into_owned()
        }
        Format::Markdown => table::to_markdown(reports),
        Format::Json => table::to_json(reports)? + "\n",
    })
}

#[derive(Serialize)]
struct KlOutput<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    point: &'a KlPoint,
}

pub fn run_kl(args: &KlArgs) -> Result<(Scenario, KlPoint)> {
    let s = inline_scenario(&args.scenario)?;
    let kl = kl_point(&s.dgp, &s.dgp.kind.working_model())?;
    Ok((s, kl))
}

pub fn render_kl(s: &Scenario, kl: &KlPoint, format: Format) -> Result<String> {
    let names = ["intercept", "slope"];
    let se = |j: usize| kl.mc_se.as_ref().map(|v| v[j]);
    Ok(match format {
        Format::Json => {
            let out = KlOutput { scenario: &s.id, point: kl };
            serde_json::to_string_pretty(&out).map_err(brse_core::Error::from)? + "\n"
        }
        Format::Csv => {
            let mut out = String::from("parameter,value,mc_se\n");
            for (j, name) in names.iter().enumerate() {
                let se = se(j).map_or_else(|| "NA".to_string(), |v| format!("{v:.3e}"));
                out.push_str(&format!("{name},{:.6},{se}\n", kl.theta[j]));
            }
            out
        }
        Format::Markdown => {
            let head = ["Parameter", "Value", "MC SE"].map(String::from);
            let rows: Vec<Vec<String>> = names
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    vec![
                        name.to_string(),
                        format!("{:.3}", kl.theta[j]),
                        se(j).map_or_else(|| "NA".to_string(), |v| format!("{v:.3e}")),
                    ]
                })
                .collect();
            table::markdown_table(&head, &rows)
        }
    })
}
