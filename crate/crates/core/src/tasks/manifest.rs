//! JSON task manifests: one document that regenerates a task exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv::{load_csv, CsvSchema, LagFeature, LagPreset};
use super::mackey_glass::{mackey_glass, mg_task, MgParams, MgVariant, MG_WASHOUT};
use super::plant::{plant_task, PlantParams};
use super::{add_gaussian_noise, target_std, Task};
use crate::error::{Error, Result};
use crate::seeds::{rng_for, Stream};

/// Default validation noise as a fraction of the clean target std.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.05;
/// Default share of CSV rows used for training when no split is given.
const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    MackeyGlass,
    Plant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagSpec {
    Preset(LagPreset),
    Features(Vec<LagFeature>),
}

/// Row counts for CSV tasks. Without `val` the validation split is the test
/// split with Gaussian noise added to its targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSplits {
    pub train: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<usize>,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TaskManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<MgVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<CsvSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<LagSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<CsvSplits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub washout: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

impl TaskManifest {
    pub fn mackey_glass(variant: MgVariant, seed: u64) -> Self {
        TaskManifest {
            generator: Some(Generator::MackeyGlass),
            variant: Some(variant),
            seed,
            ..Default::default()
        }
    }

    pub fn plant(seed: u64) -> Self {
        TaskManifest {
            generator: Some(Generator::Plant),
            seed,
            ..Default::default()
        }
    }

    pub fn csv(file: impl Into<PathBuf>, lags: Option<LagSpec>, seed: u64) -> Self {
        TaskManifest {
            file: Some(file.into()),
            lags,
            seed,
            ..Default::default()
        }
    }

    /// Parses the short task names `mg`, `mg1`, `mg2`, `plant` and `csv:PATH`.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        if let Some(path) = name.strip_prefix("csv:") {
            return Ok(TaskManifest::csv(path, None, seed));
        }
        match name {
            "plant" => Ok(TaskManifest::plant(seed)),
            other => Ok(TaskManifest::mackey_glass(other.parse()?, seed)),
        }
    }

    /// Reads a manifest; a relative `file` is resolved against the manifest's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        let mut m: TaskManifest = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        if let (Some(file), Some(dir)) = (&m.file, path.parent()) {
            if file.is_relative() {
                m.file = Some(dir.join(file));
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn label(&self) -> String {
        match (self.generator, &self.file) {
            (Some(Generator::MackeyGlass), _) => self.variant.unwrap_or_default().name().to_string(),
            (Some(Generator::Plant), _) => "plant".to_string(),
            (None, Some(f)) => f.file_stem().and_then(|s| s.to_str()).unwrap_or("csv").to_string(),
            (None, None) => "task".to_string(),
        }
    }

    pub fn build(&self) -> Result<Task> {
        match (self.generator, &self.file) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig("manifest names both a generator and a file".into())),
            (None, None) => Err(Error::InvalidConfig("manifest names neither a generator nor a file".into())),
            (Some(Generator::MackeyGlass), None) => {
                let series = mackey_glass(&MgParams::default(), &mut rng_for(self.seed, Stream::Task))?;
                let mut task = mg_task(&series, self.variant.unwrap_or_default())?;
                if let Some(w) = self.washout.filter(|&w| w != MG_WASHOUT) {
                    task = rewash(task, w)?;
                }
                Ok(task)
            }
            (Some(Generator::Plant), None) => {
                let params = PlantParams {
                    washout: self.washout.unwrap_or(PlantParams::default().washout),
                    ..PlantParams::default()
                };
                plant_task(&params, &mut rng_for(self.seed, Stream::Task))
            }
            (None, Some(file)) => self.build_csv(file),
        }
    }

    fn build_csv(&self, file: &Path) -> Result<Task> {
        let (schema, features, preset_washout) = match &self.lags {
            Some(LagSpec::Preset(p)) => (self.schema.clone().unwrap_or_else(|| p.schema()), p.features(), Some(p.default_washout())),
            Some(LagSpec::Features(f)) => {
                let schema = match &self.schema {
                    Some(s) => s.clone(),
                    None => schema_from_features(f),
                };
                (schema, f.clone(), None)
            }
            None => {
                let (schema, f) = auto_features(file, self.schema.as_ref())?;
                (schema, f, None)
            }
        };
        let washout = self.washout.or(preset_washout).unwrap_or(100);
        let full = load_csv(file, &schema, &features)?;
        let n = full.len();
        let splits = self.splits.unwrap_or_else(|| {
            let train = (n as f64 * DEFAULT_TRAIN_FRACTION).round() as usize;
            CsvSplits {
                train,
                val: None,
                test: n - train,
            }
        });
        let used = splits.train + splits.val.unwrap_or(0) + splits.test;
        if used > n {
            return Err(Error::Schema(format!("splits need {used} rows but only {n} are usable")));
        }
        let name = self.label();
        let train = full.slice(0, splits.train, washout, format!("{name}-train"))?;
        let mut at = splits.train;
        let val_clean = splits.val.map(|v| {
            let s = full.slice(at, v, washout, format!("{name}-val"));
            at += v;
            s
        });
        let test = full.slice(at, splits.test, washout, format!("{name}-test"))?;
        let val = match val_clean {
            Some(v) => v?,
            None => {
                let sigma = self.noise_sigma.unwrap_or(DEFAULT_NOISE_FRACTION * target_std(&test));
                add_gaussian_noise(&test, sigma, &mut rng_for(self.seed, Stream::Noise))?.renamed(&format!("{name}-val"))
            }
        };
        Task::new(name, train, val, test)
    }
}

fn rewash(task: Task, w: usize) -> Result<Task> {
    Task::new(task.name, task.train.with_washout(w)?, task.val.with_washout(w)?, task.test.with_washout(w)?)
}

fn schema_from_features(features: &[LagFeature]) -> CsvSchema {
    let mut inputs: Vec<String> = Vec::new();
    for f in features {
        let cols: Vec<String> = match f {
            LagFeature::Channel { channel, .. } => vec![channel.clone()],
            LagFeature::Mean { mean, .. } => mean.clone(),
        };
        for c in cols {
            if c != "y" && !inputs.contains(&c) {
                inputs.push(c);
            }
        }
    }
    CsvSchema { inputs, target: "y".into() }
}

/// Every non-target column at lag 0 followed by the target at lag 1.
fn auto_features(file: &Path, schema: Option<&CsvSchema>) -> Result<(CsvSchema, Vec<LagFeature>)> {
    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let f = std::fs::File::open(file).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", file.display())))?;
            let mut rdr = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(f);
            let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
            if !header.iter().any(|h| h == "y") {
                return Err(Error::Schema(format!("{}: no \"y\" column", file.display())));
            }
            CsvSchema {
                inputs: header.into_iter().filter(|h| h != "y").collect(),
                target: "y".into(),
            }
        }
    };
    let mut features: Vec<LagFeature> = schema.inputs.iter().map(|c| LagFeature::channel(c, 0)).collect();
    features.push(LagFeature::channel(&schema.target, 1));
    Ok((schema, features))
}
