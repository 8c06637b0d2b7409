//! `riskbn` command-line pipeline. Every command writes its artifacts and a
//! `run.json` manifest under `--out`.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    /// `--help` / `--version` text: printed, exit 0.
    Help(String),
    /// Bad flags, unreadable or invalid inputs: exit 2.
    Usage(String),
    /// Anything else: exit 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Help(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Help(m) | CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Library errors come from invalid inputs or requests.
impl From<riskbn_core::Error> for CliError {
    fn from(e: riskbn_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "riskbn", version, about = "Bayesian-network risk modelling on categorical cohort data")]
pub struct Cli {
    /// TOML file supplying flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Hill-climb a structure from coded data.
    LearnStructure(LearnStructureArgs),
    /// Fit Dirichlet posteriors, one dataset at a time.
    Fit(FitArgs),
    /// Exact conditional distribution of one variable.
    Query(QueryArgs),
    /// Risk map with posterior intervals.
    Riskmap(RiskmapArgs),
    /// Randomized-evidence influence ranking.
    Influence(InfluenceArgs),
    /// Score a dataset and report classifier metrics.
    Validate(ValidateArgs),
    /// Forward-sample a synthetic dataset.
    Generate(GenerateArgs),
    /// Write a complete synthetic quick-start (yearly data, structure, constraints).
    Demo(DemoArgs),
    /// Clean and code raw cohort records.
    Prepare(PrepareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LearnStructure(_) => "learn-structure",
            Command::Fit(_) => "fit",
            Command::Query(_) => "query",
            Command::Riskmap(_) => "riskmap",
            Command::Influence(_) => "influence",
            Command::Validate(_) => "validate",
            Command::Generate(_) => "generate",
            Command::Demo(_) => "demo",
            Command::Prepare(_) => "prepare",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Directory for artifacts and run.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreArg {
    Bds,
    Bdeu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreakArg {
    Lexicographic,
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LearnStructureArgs {
    /// Coded CSV files; rows are pooled.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Schema JSON; defaults to the fourteen-variable reference schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Required/forbidden arcs (JSON or TOML).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Starting structure; defaults to the required arcs alone.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bds")]
    pub score: ScoreArg,
    /// Imposed equivalent sample size of the score.
    #[arg(long, default_value_t = 1.0)]
    pub iss: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, value_enum, default_value = "lexicographic")]
    pub tie_break: TieBreakArg,
    /// Needed with `--tie-break random`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    pub complete_cases: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Coded CSV files in update order (one per year).
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Structure document from learn-structure or demo.
    #[arg(long)]
    pub structure: PathBuf,
    /// `auto` (total rows / denominator) or a positive number.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    #[arg(long, default_value_t = riskbn_core::params::DEFAULT_ALPHA_DENOMINATOR)]
    pub alpha_denominator: f64,
    /// `empirical` (pooled input data), `published` (reference class
    /// percentages) or a marginals JSON file.
    #[arg(long, default_value = "empirical")]
    pub marginals: String,
    #[arg(long)]
    pub complete_cases: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Variable name.
    #[arg(long)]
    pub target: String,
    /// `name=state`, repeatable.
    #[arg(long)]
    pub evidence: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapFormat {
    Svg,
    Text,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RiskmapArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `name=state` of the outcome.
    #[arg(long)]
    pub target: String,
    /// `name=state`, repeatable.
    #[arg(long)]
    pub cond: Vec<String>,
    /// One or two axis variables.
    #[arg(long, required = true, num_args = 1..=2, value_delimiter = ',')]
    pub axes: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "svg")]
    pub format: MapFormat,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InfluenceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `name=state` of the outcome.
    #[arg(long)]
    pub target: String,
    /// Coded CSV; rows with the target state are used.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Draw this many positives from the posterior-mean network instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Use at most this many positive rows (file order).
    #[arg(long)]
    pub max_rows: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// `name=state` treated as the positive class.
    #[arg(long)]
    pub target: String,
    /// `gmean` or a fixed value in [0, 1].
    #[arg(long, default_value = "gmean")]
    pub threshold: String,
    /// Choose the G-mean threshold on this dataset instead of `--data`.
    #[arg(long)]
    pub threshold_data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorArg {
    /// Reference schema with published class marginals.
    Demo,
    /// Binary chain X0 → X1 → … (`--nodes`).
    Chain,
    /// Independent binary variables (`--nodes`).
    Independent,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Rows per year.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "2012")]
    pub years: Vec<i32>,
    #[arg(long, value_enum, default_value = "demo")]
    pub generator: GeneratorArg,
    #[arg(long, default_value_t = 3)]
    pub nodes: usize,
    /// Sample from this model's posterior-mean network instead.
    #[arg(long, conflicts_with = "generator")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 79_225)]
    pub n_per_year: usize,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "2012,2013,2014,2015")]
    pub years: Vec<i32>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepareArgs {
    /// Raw records CSV.
    #[arg(long)]
    pub raw: PathBuf,
    /// SES cut points; default mean ± 1 standard deviation of the batch.
    #[arg(long, requires = "ses_high")]
    pub ses_low: Option<f64>,
    #[arg(long, requires = "ses_low")]
    pub ses_high: Option<f64>,
    /// Skip the 3σ outlier screen.
    #[arg(long)]
    pub no_screen: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

/// Parses `args` (program name first), applies `--config`, runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<manifest::RunManifest>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // required flags may come from the config file, so merge before parsing
    let (config_path, sub) = config::scan(&argv);
    let argv = match (&config_path, sub) {
        (Some(path), Some(sub)) => config::merge_config(&argv, &sub, path)?,
        _ => argv,
    };
    let cli = Cli::try_parse_from(&argv).map_err(clap_error)?;
    commands::execute(&cli.command, cli.config)
}

fn clap_error(e: clap::Error) -> CliError {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => {
            let text = e.render().to_string();
            CliError::Usage(text.strip_prefix("error: ").unwrap_or(&text).to_owned())
        }
    }
}
