//! Experiment orchestration: repeated 80/10/10 evaluations, parameter sweeps
//! over synthetic designs, and column-selection comparisons.
//!
//! Every repetition derives its randomness from `(seed, repetition index)`,
//! repetitions run on a pool of `workers` threads, and results are reduced in
//! index order, so the JSON output (minus timings) does not depend on the
//! worker count.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::tuned_penalized_fit;
use crate::cur::{equal_budget_comparison, CurComparison, TargetMatrix};
use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, UoiError};
use crate::metrics::{self, MetricReport};
use crate::resampling::{domain, split_80_10_10, SeedSpec};
use crate::solvers::{negative_log_likelihood, Task};
use crate::support::Support;
use crate::synthetic::{self, GeneratorSpec};
use crate::uoi::{run_uoi, ModelEstimate, UoIConfig};

pub const UOI: &str = "uoi";
pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentTask {
    Lasso,
    Logistic,
    Cur,
    Synth,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    B1,
    B2,
    Noise,
    Sparsity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Keeps `n = round(ratio * p)` when the sparsity sweep changes `p`.
    pub samples_per_feature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurParams {
    pub ranks: Vec<usize>,
    pub cols_per_rank: usize,
    pub encoded: bool,
}

impl Default for CurParams {
    fn default() -> Self {
        Self {
            ranks: vec![2, 4, 6],
            cols_per_rank: 10,
            encoded: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: ExperimentTask,
    pub x_path: Option<PathBuf>,
    pub y_path: Option<PathBuf>,
    /// Optional known coefficients for real-data runs that have them.
    pub beta_path: Option<PathBuf>,
    pub uoi: UoIConfig,
    pub generator: GeneratorSpec,
    pub sweep: Option<SweepSpec>,
    pub cur: CurParams,
    pub repetitions: usize,
    /// Thread count; an execution detail reported with the timings, not
    /// echoed with the configuration.
    #[serde(skip, default = "one_worker")]
    pub workers: usize,
    /// Fit the validation-tuned single-penalty baseline next to UoI.
    pub baseline: bool,
    pub output: Option<PathBuf>,
    pub csv_output: Option<PathBuf>,
}

fn one_worker() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: ExperimentTask::Lasso,
            x_path: None,
            y_path: None,
            beta_path: None,
            uoi: UoIConfig::default(),
            generator: GeneratorSpec::default(),
            sweep: None,
            cur: CurParams::default(),
            repetitions: 100,
            workers: 1,
            baseline: true,
            output: None,
            csv_output: None,
        }
    }
}

/// Outcome of one method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub metrics: MetricReport,
    pub coefficients: CoefficientVector,
    pub support: Support,
    pub flagged_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub seed: SeedSpec,
    pub methods: BTreeMap<String, MethodResult>,
    /// Failure message; failed repetitions are left out of the aggregates.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single value).
    pub sd: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            sd,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_value: Option<f64>,
    pub method: String,
    pub succeeded: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, Aggregate>,
    /// Coefficient variance across repetitions (only when every repetition
    /// shares the same feature count).
    pub estimation_variance: Option<f64>,
}

/// Execution details that may differ between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub workers: usize,
    pub total_seconds: f64,
    pub per_repetition_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task: ExperimentTask,
    pub config: ExperimentConfig,
    pub seed: SeedSpec,
    pub repetitions: Vec<RepetitionRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// UoI fitted on all rows (data-file tasks only).
    pub model: Option<ModelEstimate>,
    pub cur: Vec<CurComparison>,
    pub failed_repetitions: usize,
    pub timings: Option<Timings>,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| UoiError::Numerical(e.to_string()))
    }

    /// JSON without wall-clock fields; identical for identical config and seed.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timings = None;
        copy.to_json()
    }

    /// One line per aggregate row and metric.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("sweep_value,method,metric,mean,sd,count\n");
        for row in &self.aggregates {
            let sv = row.sweep_value.map(crate::io::format_f64).unwrap_or_default();
            for (name, agg) in &row.metrics {
                out.push_str(&format!(
                    "{sv},{},{name},{},{},{}\n",
                    row.method,
                    crate::io::format_f64(agg.mean),
                    crate::io::format_f64(agg.sd),
                    agg.count
                ));
            }
            if let Some(v) = row.estimation_variance {
                out.push_str(&format!(
                    "{sv},{},estimation_variance,{},0,{}\n",
                    row.method,
                    crate::io::format_f64(v),
                    row.succeeded
                ));
            }
        }
        out
    }

    pub fn all_failed(&self) -> bool {
        !self.repetitions.is_empty() && self.failed_repetitions == self.repetitions.len()
    }
}

/// Held-out metrics of one fitted model.
pub fn evaluate(
    fit: &CoefficientVector,
    test: &DataSet,
    task: Task,
    truth: Option<&CoefficientVector>,
) -> MetricReport {
    let mut report = MetricReport {
        selection_ratio: Some(metrics::selection_ratio(fit.values.as_slice())),
        ..Default::default()
    };
    let eta = fit.predict(test.features());
    let y = test.response();
    let k = fit.nonzero_count();
    match task {
        Task::Regression => {
            report.r_squared = metrics::r_squared(y.as_slice(), eta.as_slice()).ok();
            report.bic = metrics::bic_regression(y.as_slice(), eta.as_slice(), y.len(), k).ok();
        }
        Task::Classification => {
            let ll = -negative_log_likelihood(y, &eta);
            report.bic = metrics::bic_classification(ll, y.len() as f64, k).ok();
            let correct = eta
                .iter()
                .zip(y.iter())
                .filter(|(e, t)| (**e > 0.0) == (**t == 1.0))
                .count();
            report.accuracy = Some(correct as f64 / y.len().max(1) as f64);
        }
    }
    if let Some(truth) = truth {
        let true_support = truth.support();
        let est = fit.support();
        report.selection_accuracy = Some(metrics::selection_accuracy(&true_support, &est));
        report.estimation_rms =
            metrics::estimation_rms(truth.values.as_slice(), fit.values.as_slice()).ok();
        let (fp, fnn) = metrics::confusion_counts(&true_support, &est);
        report.false_positives = Some(fp);
        report.false_negatives = Some(fnn);
    }
    report
}

/// One 80/10/10 repetition: UoI on the training block, the tuned baseline
/// choosing its penalty on the selection block, metrics on the test block.
pub fn run_split_repetition(
    data: &DataSet,
    truth: Option<&CoefficientVector>,
    uoi: &UoIConfig,
    task: Task,
    baseline: bool,
    seed: SeedSpec,
) -> Result<BTreeMap<String, MethodResult>> {
    let plan = split_80_10_10(data.n_samples(), seed.substream(domain::SPLIT, 0))?;
    let train = data.select_rows(&plan.blocks[0]);
    let select = data.select_rows(&plan.blocks[1]);
    let test = data.select_rows(&plan.blocks[2]);

    let mut cfg = uoi.clone();
    cfg.seed = seed;
    let est = run_uoi(&train, &cfg, task)?;
    let mut out = BTreeMap::new();
    out.insert(
        UOI.to_string(),
        MethodResult {
            metrics: evaluate(&est.coefficients, &test, task, truth),
            support: est.support.clone(),
            flagged_cells: est.flagged.len(),
            coefficients: est.coefficients,
        },
    );
    if baseline {
        let base = tuned_penalized_fit(&train, &select, &uoi.grid, task, &uoi.solver)?;
        out.insert(
            BASELINE.to_string(),
            MethodResult {
                metrics: evaluate(&base.coefficients, &test, task, truth),
                support: base.coefficients.support(),
                flagged_cells: 0,
                coefficients: base.coefficients,
            },
        );
    }
    Ok(out)
}

fn metric_values(report: &MetricReport) -> Vec<(&'static str, f64)> {
    let mut v = Vec::new();
    let mut push = |name, x: Option<f64>| {
        if let Some(x) = x {
            v.push((name, x));
        }
    };
    push("selection_accuracy", report.selection_accuracy);
    push("estimation_rms", report.estimation_rms);
    push("r_squared", report.r_squared);
    push("bic", report.bic);
    push("selection_ratio", report.selection_ratio);
    push("false_positives", report.false_positives.map(|c| c as f64));
    push("false_negatives", report.false_negatives.map(|c| c as f64));
    push("accuracy", report.accuracy);
    v
}

/// Mean and s.d. of every metric per (sweep value, method), in first-seen order.
pub fn aggregate(reps: &[RepetitionRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Option<f64>, String)> = Vec::new();
    for r in reps {
        for m in r.methods.keys() {
            let key = (r.sweep_value, m.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys.into_iter()
        .map(|(sweep_value, method)| {
            let group: Vec<&RepetitionRecord> =
                reps.iter().filter(|r| r.sweep_value == sweep_value).collect();
            let ok: Vec<&MethodResult> = group
                .iter()
                .filter(|r| r.failure.is_none())
                .filter_map(|r| r.methods.get(&method))
                .collect();
            let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for m in &ok {
                for (name, v) in metric_values(&m.metrics) {
                    columns.entry(name.to_string()).or_default().push(v);
                }
            }
            let metrics = columns
                .into_iter()
                .filter_map(|(k, v)| Aggregate::from_values(&v).map(|a| (k, a)))
                .collect();
            let coefs: Vec<CoefficientVector> = ok.iter().map(|m| m.coefficients.clone()).collect();
            let estimation_variance = metrics::estimation_variance(&coefs).ok();
            AggregateRow {
                sweep_value,
                method,
                succeeded: ok.len(),
                failed: group.len() - ok.len(),
                metrics,
                estimation_variance,
            }
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(UoiError::invalid("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| UoiError::Numerical(format!("cannot start worker pool: {e}")))
}

struct Job {
    index: usize,
    sweep_value: Option<f64>,
    seed: SeedSpec,
}

/// Runs `jobs` in parallel and keeps their input order.
fn run_jobs<F>(jobs: Vec<Job>, body: F) -> (Vec<RepetitionRecord>, Vec<f64>)
where
    F: Fn(&Job) -> Result<BTreeMap<String, MethodResult>> + Sync,
{
    let results: Vec<(RepetitionRecord, f64)> = jobs
        .par_iter()
        .map(|job| {
            let start = Instant::now();
            let outcome = body(job);
            let elapsed = start.elapsed().as_secs_f64();
            let (methods, failure) = match outcome {
                Ok(m) => (m, None),
                Err(e) => (BTreeMap::new(), Some(e.to_string())),
            };
            (
                RepetitionRecord {
                    index: job.index,
                    sweep_value: job.sweep_value,
                    seed: job.seed,
                    methods,
                    failure,
                },
                elapsed,
            )
        })
        .collect();
    results.into_iter().unzip()
}

fn task_of(config: &ExperimentConfig) -> Task {
    match config.task {
        ExperimentTask::Logistic => Task::Classification,
        _ => Task::Regression,
    }
}

/// Repeated split evaluation on a fixed data set.
pub fn run_on_data(
    data: &DataSet,
    truth: Option<&CoefficientVector>,
    config: &ExperimentConfig,
) -> Result<ResultRecord> {
    let start = Instant::now();
    config.uoi.validate()?;
    let task = task_of(config);
    let base = config.uoi.seed;
    let jobs = (0..config.repetitions)
        .map(|r| Job {
            index: r,
            sweep_value: None,
            seed: base.substream(domain::REPETITION, r as u64),
        })
        .collect();
    let (model, (reps, times)) = pool(config.workers)?.install(|| {
        let model = run_uoi(data, &config.uoi, task);
        let reps = run_jobs(jobs, |job| {
            run_split_repetition(data, truth, &config.uoi, task, config.baseline, job.seed)
        });
        (model, reps)
    });
    let mut record = finish(config, reps, Vec::new(), times, start);
    record.model = Some(model?);
    Ok(record)
}

/// Synthetic sweep: every repetition draws a fresh data set from the generator
/// and evaluates UoI (and the baseline) at each swept value.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| UoiError::invalid("sweep task needs a sweep parameter and values"))?;
    if sweep.values.is_empty() {
        return Err(UoiError::invalid("sweep needs at least one value"));
    }
    config.uoi.validate()?;
    config.generator.validate()?;
    for &v in &sweep.values {
        apply_sweep_value(config, sweep, v)?;
    }
    let base = config.uoi.seed;
    let mut jobs = Vec::new();
    for &v in &sweep.values {
        for r in 0..config.repetitions {
            jobs.push(Job {
                index: r,
                sweep_value: Some(v),
                seed: base.substream(domain::REPETITION, r as u64),
            });
        }
    }
    let (reps, times) = pool(config.workers)?.install(|| {
        run_jobs(jobs, |job| {
            let value = job.sweep_value.expect("sweep jobs carry a value");
            let (mut generator, uoi) = apply_sweep_value(config, sweep, value)?;
            generator.seed = job.seed.substream(domain::SWEEP, 0);
            let inst = synthetic::generate(&generator)?;
            run_split_repetition(
                &inst.data,
                Some(&inst.beta),
                &uoi,
                Task::Regression,
                config.baseline,
                job.seed,
            )
        })
    });
    Ok(finish(config, reps, Vec::new(), times, start))
}

/// Generator and UoI settings at one sweep value.
pub fn apply_sweep_value(
    config: &ExperimentConfig,
    sweep: &SweepSpec,
    value: f64,
) -> Result<(GeneratorSpec, UoIConfig)> {
    let mut generator = config.generator.clone();
    let mut uoi = config.uoi.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(UoiError::invalid(format!("bootstrap count must be a positive integer, got {v}")))
        }
    };
    match sweep.parameter {
        SweepParameter::B1 => uoi.b1 = as_count(value)?,
        SweepParameter::B2 => uoi.b2 = as_count(value)?,
        SweepParameter::Noise => generator.noise_multiplier = value,
        SweepParameter::Sparsity => {
            if !(0.0..1.0).contains(&value) {
                return Err(UoiError::invalid(format!("sparsity must lie in [0, 1), got {value}")));
            }
            generator.p = ((generator.k as f64) / (1.0 - value)).round().max(1.0) as usize;
            if let Some(ratio) = sweep.samples_per_feature {
                generator.n = (ratio * generator.p as f64).round().max(10.0) as usize;
            }
        }
    }
    generator.validate()?;
    Ok((generator, uoi))
}

/// Column-selection comparison, repeated under independent seeds.
pub fn run_cur(matrix: &TargetMatrix, config: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let base = config.uoi.seed;
    let reps = config.repetitions.max(1);
    let (comparisons, times): (Vec<Result<CurComparison>>, Vec<f64>) =
        pool(config.workers)?.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let t = Instant::now();
                    let c = equal_budget_comparison(
                        matrix,
                        &config.cur.ranks,
                        config.cur.cols_per_rank,
                        config.uoi.b1,
                        base.substream(domain::REPETITION, r as u64),
                    );
                    (c, t.elapsed().as_secs_f64())
                })
                .unzip()
        });
    let comparisons: Vec<CurComparison> = comparisons.into_iter().collect::<Result<_>>()?;
    Ok(finish(config, Vec::new(), comparisons, times, start))
}

fn finish(
    config: &ExperimentConfig,
    repetitions: Vec<RepetitionRecord>,
    cur: Vec<CurComparison>,
    per_repetition_seconds: Vec<f64>,
    start: Instant,
) -> ResultRecord {
    let failed = repetitions.iter().filter(|r| r.failure.is_some()).count();
    ResultRecord {
        task: config.task,
        config: config.clone(),
        seed: config.uoi.seed,
        aggregates: aggregate(&repetitions),
        repetitions,
        model: None,
        cur,
        failed_repetitions: failed,
        timings: Some(Timings {
            workers: config.workers,
            total_seconds: start.elapsed().as_secs_f64(),
            per_repetition_seconds,
        }),
    }
}

/// Loads inputs named in the config and dispatches on the task. The `synth`
/// task writes its files and returns a record describing the draw.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultRecord> {
    match config.task {
        ExperimentTask::Lasso | ExperimentTask::Logistic => {
            let (x, y) = load_xy(config)?;
            let data = DataSet::new(x, y)?;
            let truth = match &config.beta_path {
                Some(p) => {
                    let b = crate::io::load_csv_vector(p)?;
                    if b.len() != data.n_features() {
                        return Err(UoiError::InvalidData(format!(
                            "{}: {} coefficients for {} features",
                            p.display(),
                            b.len(),
                            data.n_features()
                        )));
                    }
                    Some(CoefficientVector::new(b, 0.0))
                }
                None => None,
            };
            run_on_data(&data, truth.as_ref(), config)
        }
        ExperimentTask::Sweep => run_sweep(config),
        ExperimentTask::Cur => {
            let path = config
                .x_path
                .as_ref()
                .ok_or_else(|| UoiError::invalid("cur needs a matrix file (--x)"))?;
            let m = crate::io::load_csv_matrix(path)?;
            let target = if config.cur.encoded {
                TargetMatrix::new_encoded(m)?
            } else {
                TargetMatrix::new(m)?
            };
            run_cur(&target, config)
        }
        ExperimentTask::Synth => Err(UoiError::invalid(
            "synth writes data files; use write_synthetic",
        )),
    }
}

fn load_xy(config: &ExperimentConfig) -> Result<(DMatrix<f64>, nalgebra::DVector<f64>)> {
    let xp = config
        .x_path
        .as_ref()
        .ok_or_else(|| UoiError::invalid("missing feature matrix path (--x)"))?;
    let yp = config
        .y_path
        .as_ref()
        .ok_or_else(|| UoiError::invalid("missing response path (--y)"))?;
    Ok((crate::io::load_csv_matrix(xp)?, crate::io::load_csv_vector(yp)?))
}

/// Writes `X.csv`, `y.csv`, `beta_true.csv` and `spec.json` into `dir`.
pub fn write_synthetic(spec: &GeneratorSpec, dir: &std::path::Path) -> Result<()> {
    let inst = synthetic::generate(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| UoiError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    crate::io::write_csv_matrix(dir.join("X.csv"), inst.data.features())?;
    crate::io::write_csv_vector(dir.join("y.csv"), inst.data.response())?;
    crate::io::write_csv_vector(dir.join("beta_true.csv"), &inst.beta.values)?;
    let json = serde_json::to_string_pretty(spec).map_err(|e| UoiError::Numerical(e.to_string()))?;
    crate::io::write_atomic(dir.join("spec.json"), json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_of_known_values() {
        let a = Aggregate::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.mean, 2.5);
        assert!((a.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Aggregate::from_values(&[7.0]).unwrap().sd, 0.0);
        assert!(Aggregate::from_values(&[]).is_none());
    }

    #[test]
    fn sparsity_sweep_rescales_design() {
        let mut config = ExperimentConfig::default();
        config.generator.k = 20;
        let sweep = SweepSpec {
            parameter: SweepParameter::Sparsity,
            values: vec![0.0, 0.5, 0.9],
            samples_per_feature: Some(3.0),
        };
        let ps: Vec<(usize, usize)> = sweep
            .values
            .iter()
            .map(|&v| {
                let (g, _) = apply_sweep_value(&config, &sweep, v).unwrap();
                (g.p, g.n)
            })
            .collect();
        assert_eq!(ps, vec![(20, 60), (40, 120), (200, 600)]);
        assert!(apply_sweep_value(&config, &sweep, 1.0).is_err());
        let b1 = SweepSpec { parameter: SweepParameter::B1, values: vec![], samples_per_feature: None };
        assert_eq!(apply_sweep_value(&config, &b1, 5.0).unwrap().1.b1, 5);
        assert!(apply_sweep_value(&config, &b1, 2.5).is_err());
    }
}
