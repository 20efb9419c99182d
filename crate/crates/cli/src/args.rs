use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "brse", version, about = "Bayesian robust standard errors")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Plain-text `key = value` file mirroring the long flags; flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for chains and replicates (defaults to all cores).
    #[arg(long, global = true, env = "BRSE_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file and report frequentist and Bayesian standard errors.
    Fit(FitArgs),
    /// Run a simulation campaign over a scenario grid.
    Simulate(SimulateArgs),
    /// Print the minimal Kullback-Leibler point of a scenario.
    KlPoint(KlArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Markdown,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Poisson,
    ExpPh,
    NormalMean,
}

#[derive(Clone, Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Destination file (written atomically); stdout when absent.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct McmcArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, burn-in included.
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target acceptance rate of the adaptive Metropolis sampler.
    #[arg(long)]
    pub target_acceptance: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value_t = ModelArg::Linear)]
    pub model: ModelArg,

    /// Outcome column. Ignored by `exp-ph`, which reads `--time`/`--event`.
    #[arg(long)]
    pub outcome: Option<String>,

    /// Two columns averaged into the outcome, e.g. `sbp1,sbp2`.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "COLS")]
    pub average: Vec<String>,

    /// Covariate columns, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "COLS")]
    pub covariates: Vec<String>,

    /// Drop the intercept column.
    #[arg(long)]
    pub no_intercept: bool,

    #[arg(long)]
    pub time: Option<String>,

    /// Event indicator column (1/0 or true/false).
    #[arg(long)]
    pub event: Option<String>,

    /// Sampling variance assumed by the normal-mean model.
    #[arg(long, default_value_t = 1.0)]
    pub assumed_variance: f64,

    /// Prior mean of every coefficient.
    #[arg(long, default_value_t = 0.0)]
    pub prior_mean: f64,

    /// Prior variance of every coefficient.
    #[arg(long, default_value_t = 1e3)]
    pub prior_var: f64,

    /// Inverse-gamma shape of the linear-model residual variance.
    #[arg(long, default_value_t = 0.01)]
    pub sigma2_shape: f64,

    #[arg(long, default_value_t = 0.01)]
    pub sigma2_rate: f64,

    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    #[command(flatten)]
    pub mcmc: McmcArgs,

    /// Also report equal-tailed quantile credible intervals.
    #[arg(long)]
    pub quantile_credible: bool,

    /// Write the retained posterior draws to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub dump_draws: Option<PathBuf>,

    /// Treat non-numeric cells as errors instead of dropping the row.
    #[arg(long)]
    pub strict: bool,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Linear,
    Poisson,
    ExpPh,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CovariatesArg {
    Uniform,
    Normal,
}

/// An inline scenario, used when no grid is named.
#[derive(Clone, Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Quadratic coefficient of the linear, Poisson and fixed-design DGPs.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Weibull shape.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Weibull log-hazard slope.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Covariate law, overriding the scenario default.
    #[arg(long, value_enum)]
    pub covariates: Option<CovariatesArg>,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    /// Built-in grid: table1, table2, table3, tableS1 or figure1.
    #[arg(long)]
    pub grid: Option<String>,

    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    #[command(flatten)]
    pub mcmc: McmcArgs,

    /// Include per-replicate results in JSON output.
    #[arg(long)]
    pub keep_replicates: bool,

    /// Suppress per-scenario progress lines on stderr.
    #[arg(long)]
    pub quiet: bool,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Clone, Debug, Args)]
pub struct KlArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[command(flatten)]
    pub out: OutputArgs,
}
