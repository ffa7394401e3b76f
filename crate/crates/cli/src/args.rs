use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segreg::simulate::CovarianceSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "segreg", version, about = "Change-point detection for high-dimensional sparse regression")]
pub struct Cli {
    /// Worker threads (default: SEGREG_THREADS, else all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Estimate change points and per-segment coefficients.
    Detect(DetectArgs),
    /// Draw a dataset from a ground-truth model.
    Simulate(SimulateArgs),
    /// Ordered train/test cross-validation over (lambda, k).
    Cv(CvArgs),
    /// Time the exact and the greedy detector across sample sizes.
    Bench(BenchArgs),
    /// Re-run a command from a manifest.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Detect(_) => "detect",
            Command::Simulate(_) => "simulate",
            Command::Cv(_) => "cv",
            Command::Bench(_) => "bench",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Dp,
    Bs,
}

impl From<MethodArg> for segreg::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dp => segreg::Method::Dp,
            MethodArg::Bs => segreg::Method::Bs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// CSV with header; response first, then covariates.
    #[arg(long)]
    pub input: PathBuf,
    /// Sort rows by this column and drop it.
    #[arg(long)]
    pub order_by: Option<String>,
    /// Subtract column means from the response and covariates.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = segreg::model::DEFAULT_SOLVER_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = segreg::model::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Dp)]
    pub method: MethodArg,
    /// Sparsity penalty (default sqrt(log(p) / (delta n))).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Per-segment penalty (default lambda / 4).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Truth JSON written by `simulate`; adds an accuracy report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

/// Ground-truth model: a canned one or a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Two,
    Three,
    Custom(PathBuf),
}

impl FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "two" => ModelArg::Two,
            "three" => ModelArg::Three,
            "" => return Err("empty model".into()),
            path => ModelArg::Custom(PathBuf::from(path)),
        })
    }
}

fn parse_cov(s: &str) -> Result<CovarianceSpec, String> {
    s.parse().map_err(|e: segreg::Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// `two`, `three`, or the path of a truth JSON.
    #[arg(long, default_value = "two", value_parser = clap::value_parser!(ModelArg))]
    pub model: ModelArg,
    /// identity, toeplitz:RHO or equicorr:C (canned models only).
    #[arg(long, default_value = "identity", value_parser = parse_cov)]
    pub cov: CovarianceSpec,
    /// Number of covariates (canned models only).
    #[arg(long)]
    pub p: Option<usize>,
    /// Noise standard deviation (canned models only).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Truth JSON (default `<output>.truth.json`).
    #[arg(long)]
    pub truth_output: Option<PathBuf>,
}

/// `a:b:count` for `count` log-spaced values from `a` to `b`, or a comma
/// separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambdaGrid(pub Vec<f64>);

impl FromStr for LambdaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            [a, b, count] => {
                let (a, b) = (num(a)?, num(b)?);
                let count: usize = count.trim().parse().map_err(|_| format!("bad count: {count:?}"))?;
                if !(a > 0.0 && b > 0.0) || count == 0 {
                    return Err("log grid needs a, b > 0 and count >= 1".into());
                }
                if count == 1 {
                    return Ok(LambdaGrid(vec![a]));
                }
                let (la, lb) = (a.ln(), b.ln());
                let step = (lb - la) / (count - 1) as f64;
                let mut grid: Vec<f64> = (0..count).map(|i| (la + step * i as f64).exp()).collect();
                // pin the endpoints exactly
                grid[0] = a;
                grid[count - 1] = b;
                Ok(LambdaGrid(grid))
            }
            [list] => list.split(',').map(num).collect::<Result<_, _>>().map(LambdaGrid),
            _ => Err(format!("expected a:b:count or a comma list, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Lambda grid, `a:b:count` (log-spaced) or `l1,l2,..`.
    #[arg(long, value_parser = clap::value_parser!(LambdaGrid))]
    pub lambdas: LambdaGrid,
    /// Largest number of segments; k ranges over 1..=k_max.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV of (lambda, k, test_rss, status); the summary goes to
    /// `<output>.summary.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleSizes(pub Vec<usize>);

impl FromStr for SampleSizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("not a sample size: {t:?}")))
            .collect::<Result<_, _>>()
            .map(SampleSizes)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma separated sample sizes.
    #[arg(long, value_parser = clap::value_parser!(SampleSizes), default_value = "100,200,400")]
    pub n_list: SampleSizes,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Fixed lambda (default sqrt(log(p) / (delta n)) per n).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// gamma as a multiple of lambda.
    #[arg(long, default_value_t = 0.25)]
    pub gamma_ratio: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV of (n, method, mean_seconds, sd_seconds, cache_misses).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// A manifest, or a detect result that embeds one.
    pub manifest: PathBuf,
    /// Write the primary output here instead of the recorded path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
