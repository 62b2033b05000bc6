//! Error metric, multi-trial experiments, grid search and report tables.

use std::fmt::Write as _;
use std::time::Instant;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_baseline, BaselineConfig, Topology};
use crate::error::{Error, Result};
use crate::growth::{build_rscn, BuildConfig, BuildHistory};
use crate::reservoir::ReservoirModel;
use crate::tasks::{SupervisedSequence, Task, TaskManifest};

/// `sqrt(Σ_n ‖y(n) − t(n)‖² / (n L · var(t)))` with `var` the population
/// variance of all target values. For a single output this is the usual
/// NRMSE; for several outputs it normalises per scalar entry, so the
/// constant-mean predictor still scores exactly 1.
pub fn nrmse(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<f64> {
    if predictions.shape() != targets.shape() {
        return Err(Error::contract(format!(
            "predictions {:?} and targets {:?} differ in shape",
            predictions.shape(),
            targets.shape()
        )));
    }
    let count = targets.len();
    if targets.ncols() < 2 || count == 0 {
        return Err(Error::UndefinedMetric("NRMSE needs at least two samples".into()));
    }
    let mean = targets.iter().sum::<f64>() / count as f64;
    let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / count as f64;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::UndefinedMetric("targets have zero variance".into()));
    }
    let sse: f64 = predictions.iter().zip(targets.iter()).map(|(y, t)| (y - t).powi(2)).sum();
    Ok((sse / (count as f64 * var)).sqrt())
}

/// NRMSE of `model` on the post-washout part of `seq`, running from the zero
/// state.
pub fn split_nrmse(model: &ReservoirModel, seq: &SupervisedSequence) -> Result<f64> {
    let y = model.predict(seq.inputs())?;
    let w = seq.washout();
    let n = seq.n_effective();
    nrmse(&y.columns(w, n).into_owned(), &seq.effective_targets())
}

/// Streaming mean and population standard deviation (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for v in values {
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        if n == 0 {
            return MeanStd::default();
        }
        MeanStd {
            mean,
            std: (m2 / n as f64).max(0.0).sqrt(),
            count: n,
        }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}±{:.4}", self.mean, self.std)
    }
}

/// A model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Rscn(BuildConfig),
    Baseline {
        #[serde(flatten)]
        config: BaselineConfig,
        #[serde(default)]
        ridge: f64,
    },
}

impl ModelSpec {
    pub fn esn(config: BaselineConfig) -> Self {
        ModelSpec::Baseline {
            config: BaselineConfig {
                topology: Topology::EsnRandom,
                ..config
            },
            ridge: 0.0,
        }
    }

    pub fn scr(config: BaselineConfig) -> Self {
        ModelSpec::Baseline {
            config: BaselineConfig {
                topology: Topology::ScrRing,
                ..config
            },
            ridge: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Rscn(_) => "RSCN",
            ModelSpec::Baseline { config, .. } => match config.topology {
                Topology::EsnRandom => "ESN",
                Topology::ScrRing => "SCR",
            },
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Rscn(c) => c.seed = seed,
            ModelSpec::Baseline { config, .. } => config.seed = seed,
        }
        out
    }

    /// Returns a copy with one named hyperparameter replaced. Names:
    /// `alpha`, `n_max`, `n_nodes`, `lambda`, `sparsity`, `ring_weight`,
    /// `g_max`, `ridge`.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("{name} must be a whole number, got {v}")))
            }
        };
        let mut out = self.clone();
        match (&mut out, name) {
            (ModelSpec::Rscn(c), "alpha" | "esp_alpha") => c.esp_alpha = value,
            (ModelSpec::Rscn(c), "n_max" | "n") => c.n_max = count(value)?,
            (ModelSpec::Rscn(c), "g_max") => c.g_max = count(value)?,
            (ModelSpec::Rscn(c), "sparsity") => c.sparsity = value,
            (ModelSpec::Rscn(c), "ridge") => c.ridge = value,
            (ModelSpec::Baseline { config, .. }, "alpha" | "esp_alpha") => config.esp_alpha = value,
            (ModelSpec::Baseline { config, .. }, "n_nodes" | "n") => config.n_nodes = count(value)?,
            (ModelSpec::Baseline { config, .. }, "lambda") => config.lambda = value,
            (ModelSpec::Baseline { config, .. }, "sparsity") => config.sparsity = value,
            (ModelSpec::Baseline { config, .. }, "ring_weight") => config.ring_weight = value,
            (ModelSpec::Baseline { ridge, .. }, "ridge") => *ridge = value,
            (_, other) => {
                return Err(Error::InvalidConfig(format!(
                    "parameter {other:?} does not apply to {}",
                    self.name()
                )))
            }
        }
        Ok(out)
    }

    /// Trains on `task.train`; RSCN also uses `task.val` for early stopping.
    pub fn fit(&self, task: &Task) -> Result<(ReservoirModel, Option<BuildHistory>)> {
        match self {
            ModelSpec::Rscn(cfg) => {
                let (m, h) = build_rscn(&task.train, &task.val, cfg)?;
                Ok((m, Some(h)))
            }
            ModelSpec::Baseline { config, ridge } => Ok((build_baseline(config, &task.train, *ridge)?, None)),
        }
    }
}

/// Per-trial numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub reservoir_size: usize,
    pub train_time_s: f64,
    pub train_nrmse: f64,
    pub val_nrmse: f64,
    pub test_nrmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub task_name: String,
    pub model_name: String,
    pub reservoir_size: MeanStd,
    pub train_time_s: MeanStd,
    pub train_nrmse: MeanStd,
    pub val_nrmse: MeanStd,
    pub test_nrmse: MeanStd,
    pub n_trials: usize,
    /// Trials that raised an error; they are excluded from the statistics.
    pub failed: usize,
    /// Successful trials in trial order.
    pub trials: Vec<TrialOutcome>,
}

impl TrialReport {
    pub fn is_complete(&self) -> bool {
        self.failed == 0
    }

    /// The report with timing zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.train_time_s = MeanStd {
            mean: 0.0,
            std: 0.0,
            count: out.train_time_s.count,
        };
        for t in &mut out.trials {
            t.train_time_s = 0.0;
        }
        out
    }
}

fn one_trial(task: &Task, spec: &ModelSpec, seed: u64) -> Result<TrialOutcome> {
    let spec = spec.with_seed(seed);
    let start = Instant::now();
    let (model, _) = spec.fit(task)?;
    let train_time_s = start.elapsed().as_secs_f64();
    Ok(TrialOutcome {
        seed,
        reservoir_size: model.n_nodes(),
        train_time_s,
        train_nrmse: split_nrmse(&model, &task.train)?,
        val_nrmse: split_nrmse(&model, &task.val)?,
        test_nrmse: split_nrmse(&model, &task.test)?,
    })
}

/// Runs `n_trials` trials on an already built task; trial `i` uses seed
/// `base_seed + i`. Trials run in parallel and are aggregated in index order.
pub fn run_trials_on(task: &Task, spec: &ModelSpec, n_trials: usize, base_seed: u64) -> Result<TrialReport> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    let results: Vec<Result<TrialOutcome>> = (0..n_trials)
        .into_par_iter()
        .map(|i| one_trial(task, spec, base_seed.wrapping_add(i as u64)))
        .collect();
    let mut trials = Vec::with_capacity(n_trials);
    let mut failed = 0;
    let mut last_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => trials.push(t),
            Err(e) => {
                warn!("trial {i} of {} on {} failed: {e}", spec.name(), task.name);
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if trials.is_empty() {
        return Err(last_err.expect("at least one trial ran"));
    }
    let stat = |f: fn(&TrialOutcome) -> f64| MeanStd::from_values(trials.iter().map(f));
    Ok(TrialReport {
        task_name: task.name.clone(),
        model_name: spec.name().to_string(),
        reservoir_size: stat(|t| t.reservoir_size as f64),
        train_time_s: stat(|t| t.train_time_s),
        train_nrmse: stat(|t| t.train_nrmse),
        val_nrmse: stat(|t| t.val_nrmse),
        test_nrmse: stat(|t| t.test_nrmse),
        n_trials,
        failed,
        trials,
    })
}

/// Builds the task described by `manifest` and runs the trials on it.
pub fn run_trials(manifest: &TaskManifest, spec: &ModelSpec, n_trials: usize, base_seed: u64) -> Result<TrialReport> {
    run_trials_on(&manifest.build()?, spec, n_trials, base_seed)
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub point: Vec<(String, f64)>,
    pub mean_val_nrmse: f64,
    pub report: TrialReport,
}

/// Parses `name=v1,v2;name2=v3` into named value lists.
pub fn parse_grid(spec: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut grid = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("grid entry {part:?} lacks '='")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("grid value {v:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("grid entry {name:?} has no values")));
        }
        grid.push((name.trim().to_string(), values));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid is empty".into()));
    }
    Ok(grid)
}

fn cartesian(grid: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((name.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

/// Evaluates every grid point on an already built task and returns the one
/// with the lowest mean validation NRMSE (first in iteration order on ties)
/// together with the full table. Test data plays no part in the choice.
pub fn grid_search_on(
    task: &Task,
    spec: &ModelSpec,
    grid: &[(String, Vec<f64>)],
    n_trials: usize,
    seed: u64,
) -> Result<(GridRow, Vec<GridRow>)> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidConfig("grid must be non-empty".into()));
    }
    let mut table = Vec::new();
    for point in cartesian(grid) {
        let mut s = spec.clone();
        for (name, v) in &point {
            s = s.with_param(name, *v)?;
        }
        let report = run_trials_on(task, &s, n_trials, seed)?;
        table.push(GridRow {
            mean_val_nrmse: report.val_nrmse.mean,
            point,
            report,
        });
    }
    let best = table
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.mean_val_nrmse < table[b].mean_val_nrmse { i } else { b });
    Ok((table[best].clone(), table))
}

pub fn grid_search(
    manifest: &TaskManifest,
    spec: &ModelSpec,
    grid: &[(String, Vec<f64>)],
    n_trials: usize,
    seed: u64,
) -> Result<(GridRow, Vec<GridRow>)> {
    grid_search_on(&manifest.build()?, spec, grid, n_trials, seed)
}

/// Applies a grid point to a spec.
pub fn apply_point(spec: &ModelSpec, point: &[(String, f64)]) -> Result<ModelSpec> {
    point.iter().try_fold(spec.clone(), |s, (n, v)| s.with_param(n, *v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

const TEXT_HEADER: [&str; 6] = ["Datasets", "Models", "N", "Training time", "Training NRMSE", "Testing NRMSE"];
const CSV_HEADER: [&str; 10] = [
    "dataset",
    "model",
    "n",
    "train_time_mean",
    "train_time_std",
    "train_nrmse_mean",
    "train_nrmse_std",
    "test_nrmse_mean",
    "test_nrmse_std",
    "n_trials",
];

fn size_cell(r: &TrialReport) -> String {
    if r.reservoir_size.std == 0.0 {
        format!("{}", r.reservoir_size.mean.round())
    } else {
        format!("{:.1}", r.reservoir_size.mean)
    }
}

/// Renders reports as a fixed-width text table or CSV. Numbers carry four
/// decimals in both forms.
pub fn emit_report(reports: &[TrialReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::contract("no reports to emit"));
    }
    match format {
        ReportFormat::Csv => {
            let mut wtr = ::csv::Writer::from_writer(Vec::new());
            wtr.write_record(CSV_HEADER)?;
            for r in reports {
                let f = |v: f64| format!("{v:.4}");
                wtr.write_record([
                    r.task_name.clone(),
                    r.model_name.clone(),
                    size_cell(r),
                    f(r.train_time_s.mean),
                    f(r.train_time_s.std),
                    f(r.train_nrmse.mean),
                    f(r.train_nrmse.std),
                    f(r.test_nrmse.mean),
                    f(r.test_nrmse.std),
                    r.n_trials.to_string(),
                ])?;
            }
            let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Text => {
            let rows: Vec<[String; 6]> = reports
                .iter()
                .map(|r| {
                    [
                        r.task_name.clone(),
                        r.model_name.clone(),
                        size_cell(r),
                        r.train_time_s.to_string(),
                        r.train_nrmse.to_string(),
                        r.test_nrmse.to_string(),
                    ]
                })
                .collect();
            let mut widths = TEXT_HEADER.map(|h| h.chars().count());
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let mut out = String::new();
            let line = |out: &mut String, cells: &[String]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            line(&mut out, &TEXT_HEADER.map(String::from));
            for row in &rows {
                line(&mut out, row);
            }
            Ok(out)
        }
    }
}
