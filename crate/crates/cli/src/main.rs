//! `logicsr`: data generation, training, prediction and the evaluation
//! harnesses behind one command.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use logicsr_core::evaluation::SweepAxis;
use logicsr_core::Regime;
use logicsr_model::ModelError;

#[derive(Parser)]
#[command(name = "logicsr", version, about = "Boolean symbolic regression with a transformer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write generated examples as JSONL.
    GenData(GenDataArgs),
    /// Train a model and write checkpoints plus a loss curve.
    Train(TrainArgs),
    /// Print ranked candidate formulas for observations.
    Predict(PredictArgs),
    /// Evaluation harnesses.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Compare model predictions with two-level minimization.
    SynthCompare(SynthArgs),
    /// Boolean network utilities.
    #[command(subcommand)]
    Grn(GrnCommand),
    /// Fit a formula to a binarized tabular dataset and report test F1.
    Classify(ClassifyArgs),
    /// Simplify a prefix formula.
    Simplify(SimplifyArgs),
}

#[derive(Args, Clone)]
pub struct GeneratorArgs {
    #[arg(long, value_parser = parse_regime)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long)]
    pub s_max: Option<usize>,
    #[arg(long)]
    pub b_max: Option<usize>,
    #[arg(long)]
    pub p_not: Option<f64>,
}

#[derive(Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML or JSON training configuration.
    #[arg(long, required_unless_present_any = ["template", "resume"])]
    pub config: Option<PathBuf>,
    /// A JSONL file to replay, or `on-the-fly` for fresh samples.
    #[arg(long, default_value = "on-the-fly")]
    pub data: String,
    #[arg(long, required_unless_present = "template")]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint; its stored configuration is used.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Print a starting configuration for a regime and exit.
    #[arg(long, value_parser = parse_regime)]
    pub template: Option<Regime>,
    /// Print progress every this many steps.
    #[arg(long, default_value_t = 50)]
    pub log_every: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sample,
    Beam,
}

#[derive(Args, Clone)]
pub struct DecodeArgs {
    #[arg(long, default_value_t = 10)]
    pub candidates: usize,
    #[arg(long, value_enum, default_value_t = Mode::Sample)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// A `.jsonl` example file, a file of truth-table bit strings (one per
    /// line), or a single bit string such as `0001`.
    #[arg(long = "in")]
    pub input: String,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Accuracy along one generation parameter.
    Sweep(SweepArgs),
    /// Occurrences of probe functions in one training epoch.
    Memorization(MemorizationArgs),
    /// Accuracy as a function of the number of observations.
    LengthGen(LengthGenArgs),
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MemorizationArgs {
    /// Not used by the probe; accepted for a uniform interface.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 300_000)]
    pub epoch: usize,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LengthGenArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "30,100,300,1000")]
    pub n_values: Vec<usize>,
    #[arg(long, default_value_t = 1_000)]
    pub samples: usize,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Per-target CSV; a JSON summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum GrnCommand {
    /// Draw a random network with bounded in-degree.
    Random(GrnRandomArgs),
    /// Simulate trajectories from random initial states.
    Simulate(GrnSimulateArgs),
    /// Infer a network from trajectories.
    Infer(GrnInferArgs),
    /// Structural metrics against a reference network, and dynamic accuracy.
    Score(GrnScoreArgs),
}

#[derive(Args)]
pub struct GrnRandomArgs {
    #[arg(long)]
    pub genes: usize,
    #[arg(long, default_value_t = 3)]
    pub max_regulators: usize,
    #[arg(long, default_value_t = 6)]
    pub b_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GrnSimulateArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GrnInferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub trajectories: PathBuf,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Network file; a per-gene CSV report is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GrnScoreArgs {
    /// Inferred network.
    #[arg(long)]
    pub network: PathBuf,
    /// Reference network.
    #[arg(long)]
    pub truth: PathBuf,
    /// Held-out trajectories for dynamic accuracy.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema naming the label and column types.
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = logicsr_core::tabular::TEST_FRACTION)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimplifyArgs {
    /// Prefix formula, e.g. `not not x_0`.
    #[arg(required_unless_present = "input")]
    pub formula: Option<String>,
    #[arg(long = "in", conflicts_with = "formula")]
    pub input: Option<String>,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: logicsr_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: logicsr_core::Error| e.to_string())
}

/// Failure classes, one exit code each.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Model(m) => f.write_str(m),
        }
    }
}

impl From<logicsr_core::Error> for CliError {
    fn from(e: logicsr_core::Error) -> Self {
        use logicsr_core::Error as E;
        match e {
            E::Config(_) => CliError::Usage(e.to_string()),
            E::Model(_) | E::NoCandidate { .. } => CliError::Model(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Core(e) => e.into(),
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            ModelError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
