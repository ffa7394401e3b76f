use std::path::{Path, PathBuf};
use std::time::Instant;

use segreg::detect::{bs_detect_cached, dp_detect_cached, CacheStats};
use segreg::simulate::{sample_dataset, GroundTruthModel};
use segreg::tuning::{cv_grid, evaluate, replication_seed, theory_lambda, EvalReport};
use segreg::{Dataset, DetectorConfig, FitCache, Method, SegmentedModel, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::args::{
    BenchArgs, Command, CvArgs, DetectArgs, MethodArg, ModelArg, ModelArgs, RerunArgs, SimulateArgs, SolverArgs,
};
use crate::error::{CliError, Result};
use crate::io::{dataset_csv, load_dataset, read_input, sha256_hex, sidecar, to_json, OutputSet};
use crate::manifest::RunManifest;
use crate::truth::{sparse, SparseEntry, TruthFile};

pub fn execute(command: &Command) -> Result<OutputSet> {
    match command {
        Command::Detect(args) => detect(args, command),
        Command::Simulate(args) => simulate(args, command),
        Command::Cv(args) => cv(args, command),
        Command::Bench(args) => bench(args, command),
        Command::Rerun(args) => rerun(args),
    }
}

fn solver_options(s: &SolverArgs) -> SolverOptions {
    SolverOptions {
        tol: s.tol,
        max_sweeps: s.max_sweeps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub fractions: Vec<f64>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectReport {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub config: DetectorConfig,
    pub k_hat: usize,
    pub alpha_hat: AlphaReport,
    pub betas: Vec<Vec<SparseEntry>>,
    pub objective: f64,
    pub per_segment_loss: Vec<f64>,
    pub kkt_gaps: Vec<f64>,
    pub cache_stats: CacheStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalReport>,
    pub manifest: RunManifest,
}

/// Runs one detector with a fresh cache.
pub fn run_detector(data: &Dataset, cfg: &DetectorConfig, method: Method) -> segreg::Result<(SegmentedModel, CacheStats)> {
    let mut cache = FitCache::new();
    let model = match method {
        Method::Dp => dp_detect_cached(data, cfg, &mut cache)?,
        Method::Bs => bs_detect_cached(data, cfg, &mut cache)?.0,
    };
    Ok((model, cache.stats()))
}

fn detect(args: &DetectArgs, command: &Command) -> Result<OutputSet> {
    let mut manifest = RunManifest::new(command);
    let input = &args.input;
    let loaded = manifest.time("load", || load_dataset(&input.input, input.order_by.as_deref(), input.center))?;
    manifest.input_sha256 = Some(loaded.sha256);
    let data = loaded.data;
    let truth = args.truth.as_deref().map(|p| TruthFile::read(p)?.model()).transpose()?;

    let lambda = args.lambda.unwrap_or_else(|| theory_lambda(data.p(), data.n(), args.delta));
    let gamma = args.gamma.unwrap_or(0.25 * lambda);
    let cfg = DetectorConfig::new(lambda, gamma, args.delta).with_solver(args.solver.tol, args.solver.max_sweeps);
    cfg.validate(data.n())?;

    let method = Method::from(args.method);
    let (model, stats) = manifest.time("detect", || run_detector(&data, &cfg, method))?;
    let evaluation = truth.as_ref().map(|t| evaluate(&model, t));

    let report = DetectReport {
        method,
        n: data.n(),
        p: data.p(),
        config: cfg,
        k_hat: model.k(),
        alpha_hat: AlphaReport {
            fractions: model.alpha.fractions(),
            rows: model.alpha.rows().to_vec(),
        },
        betas: model.fits.iter().map(|f| sparse(&f.beta)).collect(),
        objective: model.objective,
        per_segment_loss: model.per_segment_loss(),
        kkt_gaps: model.fits.iter().map(|f| f.kkt_gap).collect(),
        cache_stats: stats,
        evaluation,
        manifest,
    };
    let mut out = OutputSet::default();
    out.add(&args.output, to_json(&report));
    Ok(out)
}

pub fn resolve_model(args: &ModelArgs) -> Result<GroundTruthModel> {
    let canned = |build: fn(usize, _, f64) -> segreg::Result<GroundTruthModel>| -> Result<GroundTruthModel> {
        let p = args
            .p
            .ok_or_else(|| CliError::Config("--p is required for the canned models".into()))?;
        Ok(build(p, args.cov, args.sigma)?)
    };
    match &args.model {
        ModelArg::Two => canned(GroundTruthModel::two_segment),
        ModelArg::Three => canned(GroundTruthModel::three_segment),
        ModelArg::Custom(path) => {
            let model = TruthFile::read(path)?.model()?;
            if let Some(p) = args.p.filter(|&p| p != model.p) {
                return Err(CliError::Config(format!("--p {p} disagrees with the model file (p = {})", model.p)));
            }
            Ok(model)
        }
    }
}

fn simulate(args: &SimulateArgs, command: &Command) -> Result<OutputSet> {
    let mut manifest = RunManifest::new(command);
    manifest.seeds = vec![args.seed];
    let model = resolve_model(&args.model)?;
    let rows = model.alpha_on_grid(args.n)?;
    let data = manifest.time("sample", || sample_dataset(&model, args.n, args.seed))?;

    let mut truth = TruthFile::from_model(&model);
    truth.alpha0_rows = Some(rows.rows().to_vec());
    truth.n = Some(args.n);
    truth.seed = Some(args.seed);

    let truth_path = args
        .truth_output
        .clone()
        .unwrap_or_else(|| sidecar(&args.output, ".truth.json"));
    let mut out = OutputSet::default();
    out.add(&args.output, dataset_csv(&data)?);
    out.add(truth_path, to_json(&truth));
    out.add(sidecar(&args.output, ".manifest.json"), to_json(&manifest));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CvBest {
    pub lambda: f64,
    pub k: usize,
    pub test_rss: f64,
    pub alpha: AlphaReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub k_max: usize,
    pub feasible_cells: usize,
    pub best: CvBest,
    pub manifest: RunManifest,
}

fn cv(args: &CvArgs, command: &Command) -> Result<OutputSet> {
    let mut manifest = RunManifest::new(command);
    if args.k_max == 0 {
        return Err(CliError::Config("--k-max must be >= 1".into()));
    }
    let input = &args.input;
    let loaded = manifest.time("load", || load_dataset(&input.input, input.order_by.as_deref(), input.center))?;
    manifest.input_sha256 = Some(loaded.sha256);
    let data = loaded.data;
    let ks: Vec<usize> = (1..=args.k_max).collect();
    let lambdas = &args.lambdas.0;
    let result = manifest.time("cv", || cv_grid(&data, lambdas, &ks, args.delta, solver_options(&args.solver)))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Write {
        path: args.output.clone(),
        source: std::io::Error::other(e),
    };
    writer.write_record(["lambda", "k", "test_rss", "status"]).map_err(csv_err)?;
    for cell in &result.cells {
        let (rss, status) = match cell.test_rss {
            Some(r) => (r.to_string(), "ok"),
            None => (String::new(), "infeasible"),
        };
        writer
            .write_record([cell.lambda.to_string(), cell.k.to_string(), rss, status.to_string()])
            .map_err(csv_err)?;
    }
    let table = writer.into_inner().map_err(|e| csv_err(e.into_error().into()))?;

    let best = result.best_cell();
    let alpha = best.alpha.as_ref().expect("best cell is feasible");
    let summary = CvSummary {
        n_train: data.n().div_ceil(2),
        n_test: data.n() / 2,
        delta: args.delta,
        lambdas: lambdas.clone(),
        k_max: args.k_max,
        feasible_cells: result.cells.iter().filter(|c| c.test_rss.is_some()).count(),
        best: CvBest {
            lambda: best.lambda,
            k: best.k,
            test_rss: best.test_rss.expect("best cell is feasible"),
            alpha: AlphaReport {
                fractions: alpha.fractions(),
                rows: alpha.rows().to_vec(),
            },
        },
        manifest,
    };
    let mut out = OutputSet::default();
    out.add(&args.output, table);
    out.add(sidecar(&args.output, ".summary.json"), to_json(&summary));
    Ok(out)
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn bench(args: &BenchArgs, command: &Command) -> Result<OutputSet> {
    let mut manifest = RunManifest::new(command);
    let sizes = &args.n_list.0;
    if sizes.is_empty() || args.reps == 0 {
        return Err(CliError::Config("need at least one sample size and one repetition".into()));
    }
    if !(args.gamma_ratio.is_finite() && args.gamma_ratio >= 0.0) {
        return Err(CliError::Config("--gamma-ratio must be >= 0".into()));
    }
    let model = resolve_model(&args.model)?;
    manifest.seeds = (0..args.reps).map(|r| replication_seed(args.seed, r)).collect();

    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Write {
        path: args.output.clone(),
        source: std::io::Error::other(e),
    };
    writer
        .write_record(["n", "method", "mean_seconds", "sd_seconds", "cache_misses"])
        .map_err(csv_err)?;
    let started = Instant::now();
    for &n in sizes {
        let lambda = args.lambda.unwrap_or_else(|| theory_lambda(model.p, n, args.delta));
        let cfg = DetectorConfig::new(lambda, args.gamma_ratio * lambda, args.delta)
            .with_solver(args.solver.tol, args.solver.max_sweeps);
        cfg.validate(n)?;
        let mut seconds = [Vec::new(), Vec::new()];
        let mut misses = [Vec::new(), Vec::new()];
        for &seed in &manifest.seeds {
            let data = sample_dataset(&model, n, seed)?;
            for (i, method) in [Method::Dp, Method::Bs].into_iter().enumerate() {
                let start = Instant::now();
                let (_, stats) = run_detector(&data, &cfg, method)?;
                seconds[i].push(start.elapsed().as_secs_f64());
                misses[i].push(stats.misses as f64);
            }
        }
        for (i, method) in [MethodArg::Dp, MethodArg::Bs].into_iter().enumerate() {
            let (mean, sd) = mean_sd(&seconds[i]);
            let (miss_mean, _) = mean_sd(&misses[i]);
            let name = segreg::Method::from(method).to_string();
            writer
                .write_record([n.to_string(), name, mean.to_string(), sd.to_string(), miss_mean.to_string()])
                .map_err(csv_err)?;
        }
    }
    manifest.timings.push(crate::manifest::PhaseTiming {
        phase: "bench".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    let table = writer.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    let mut out = OutputSet::default();
    out.add(&args.output, table);
    out.add(sidecar(&args.output, ".manifest.json"), to_json(&manifest));
    Ok(out)
}

/// Reads a manifest, either standalone or embedded under `manifest`.
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let bytes = read_input(path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let inner = value.get("manifest").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| CliError::Parse(format!("{}: not a manifest: {e}", path.display())))
}

fn input_of(command: &Command) -> Option<&Path> {
    match command {
        Command::Detect(a) => Some(&a.input.input),
        Command::Cv(a) => Some(&a.input.input),
        _ => None,
    }
}

fn set_output(command: &mut Command, output: PathBuf) {
    match command {
        Command::Detect(a) => a.output = output,
        Command::Simulate(a) => a.output = output,
        Command::Cv(a) => a.output = output,
        Command::Bench(a) => a.output = output,
        Command::Rerun(a) => a.output = Some(output),
    }
}

fn rerun(args: &RerunArgs) -> Result<OutputSet> {
    let manifest = read_manifest(&args.manifest)?;
    let mut command = manifest.config;
    if matches!(command, Command::Rerun(_)) {
        return Err(CliError::Config("a manifest cannot record a rerun".into()));
    }
    if let (Some(path), Some(expected)) = (input_of(&command), manifest.input_sha256.as_deref()) {
        let digest = sha256_hex(&read_input(path)?);
        if digest != expected {
            return Err(CliError::Config(format!(
                "{} changed since the recorded run (sha256 {digest}, expected {expected})",
                path.display()
            )));
        }
    }
    if let Some(output) = &args.output {
        set_output(&mut command, output.clone());
    }
    execute(&command)
}
