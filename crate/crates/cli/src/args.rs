use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sqhardnet::activation::ActivationSpec;
use sqhardnet::analysis::QueryMode;
use sqhardnet::family::LabelMode;

/// Hard one-hidden-layer families for statistical-query learners.
///
/// Flag-based subcommands also accept `--config FILE`, a JSON object whose
/// keys are flag names.
#[derive(Debug, Parser)]
#[command(name = "sqhardnet", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hermite coefficients of an activation.
    Hermite(HermiteArgs),
    /// Labeled train/test samples from one family member.
    GenData(GenDataArgs),
    /// Numerical checks of the family's analytic properties.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Statistical-dimension and query-count arithmetic.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Distinguishing game against the adversarial oracle.
    SqGame(SqGameArgs),
    /// Gradient descent driven by statistical queries.
    GdSq(GdSqArgs),
    /// Trains a student network from a JSON experiment file.
    Train(TrainArgs),
    /// Reruns the overfitting experiments.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistArg {
    Gaussian,
    Rademacher,
    ScaleMixture,
}

#[derive(Debug, Args, Serialize)]
pub struct HermiteArgs {
    #[arg(long)]
    pub activation: ActivationSpec,
    #[arg(long)]
    pub degree: usize,
    #[arg(long, default_value_t = sqhardnet::hermite::DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long, default_value = "coeffs.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "relu")]
    pub inner: ActivationSpec,
    #[arg(long, default_value = "identity")]
    pub outer: ActivationSpec,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value = "regression")]
    pub mode: LabelMode,
    /// Comma-separated 0-based indices; defaults to the first k coordinates.
    #[arg(long)]
    pub concept: Option<String>,
    #[arg(long, default_value_t = DistArg::Gaussian, value_enum)]
    pub distribution: DistArg,
    #[arg(long)]
    pub train: usize,
    #[arg(long)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Pairwise inner products of random distinct members.
    Orthogonality(OrthogonalityArgs),
    /// Hermite series for E[g²] against Monte Carlo.
    SecondMoment(SecondMomentArgs),
    /// Truncation bounds against Monte Carlo.
    Truncation(TruncationArgs),
    /// P[|g| >= 1] for growing k.
    Anticoncentration(AnticoncentrationArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OrthogonalityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = DistArg::Gaussian, value_enum)]
    pub distribution: DistArg,
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    /// Samples of the plain Monte-Carlo estimate.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Samples of the symmetrized estimate.
    #[arg(long, default_value_t = 10_000)]
    pub sym_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "orthogonality.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SecondMomentArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "relu")]
    pub inner: ActivationSpec,
    /// Highest series degree.
    #[arg(long, default_value_t = 40)]
    pub d_max: usize,
    #[arg(long, default_value_t = sqhardnet::hermite::DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "second_moment.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TruncationArgs {
    /// Comma-separated list, paired with `--t`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "truncation.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnticoncentrationArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    pub k: Vec<usize>,
    #[arg(long, default_value = "relu")]
    pub inner: ActivationSpec,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "anticoncentration.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// d = |C| γ' / (β - γ) and the implied query count.
    Sda(SdaArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SdaArgs {
    /// With `--k`, sets |C| = C(n, k).
    #[arg(long, requires = "k", conflicts_with = "class_size")]
    pub n: Option<usize>,
    #[arg(long, requires = "n")]
    pub k: Option<usize>,
    #[arg(long, required_unless_present = "n")]
    pub class_size: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long)]
    pub gamma_prime: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, requires = "tau")]
    pub mode: Option<QueryMode>,
    #[arg(long, default_value = "bounds.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SqGameArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "relu")]
    pub inner: ActivationSpec,
    #[arg(long, default_value = "tanh")]
    pub outer: ActivationSpec,
    #[arg(long, default_value_t = DistArg::Gaussian, value_enum)]
    pub distribution: DistArg,
    #[arg(long)]
    pub tau: f64,
    /// JSON list of query specifications.
    #[arg(long)]
    pub queries: PathBuf,
    /// Samples behind the adversary's answers.
    #[arg(long, default_value_t = 20_000)]
    pub adversary_samples: usize,
    /// Samples of the expectation engine's Monte-Carlo path.
    #[arg(long, default_value_t = 200_000)]
    pub engine_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "transcript.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleArg {
    Truthful,
    Zero,
    D0,
}

#[derive(Debug, Args)]
pub struct GdSqArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub oracle: OracleArg,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the experiment's epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value = "curves.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureArg {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: FigureArg,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the preset epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0.10)]
    pub train01_max: f64,
    #[arg(long, default_value_t = 0.40)]
    pub test01_min: f64,
    #[arg(long, default_value_t = 0.3)]
    pub gap01_min: f64,
    #[arg(long, default_value_t = 0.05)]
    pub train_sq_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub test_sq_ratio_min: f64,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}
