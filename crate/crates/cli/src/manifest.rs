//! Run manifests: everything a command needs, resolved from flags, an
//! optional JSON file and built-in defaults (in that order of precedence).

use std::path::{Path, PathBuf};

use rscn::tasks::MgVariant;
use rscn::{BaselineConfig, BuildConfig, ModelSpec, OnlineConfig, OnlineMode, Phi, Split, TaskManifest, Topology};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, ModelKind};
use crate::CliError;

pub const DEFAULT_OUT: &str = "rscn-out";
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
}

/// On-disk form of a run. Every field is optional; commands fill the gaps
/// from flags and defaults, and write back the fully resolved version so the
/// run can be replayed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online: Option<OnlineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl RunManifest {
    /// Reads a manifest and makes its relative paths relative to the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = m.task.as_mut().and_then(|t| t.file.as_mut()) {
            rebase(f);
        }
        if let Some(f) = m.model_file.as_mut() {
            rebase(f);
        }
        if let Some(o) = m.outputs.as_mut() {
            rebase(&mut o.dir);
        }
        Ok(m)
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    pub seed: u64,
    /// Set when the task came from a flag or the manifest rather than the
    /// default.
    pub task_given: bool,
    pub task: TaskManifest,
    /// Set when the model spec came from the manifest file.
    pub model_from_manifest: bool,
    pub model: ModelSpec,
    pub online: OnlineConfig,
    pub out: PathBuf,
    pub trials: usize,
    pub grid: Option<String>,
    pub model_file: Option<PathBuf>,
    pub split: Split,
}

impl Resolved {
    pub fn to_manifest(&self) -> RunManifest {
        RunManifest {
            command: Some(self.command),
            task: Some(self.task.clone()),
            model: Some(self.model.clone()),
            online: Some(self.online.clone()),
            outputs: Some(Outputs { dir: self.out.clone() }),
            seed: Some(self.seed),
            trials: Some(self.trials),
            grid: self.grid.clone(),
            model_file: self.model_file.clone(),
            split: Some(self.split),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::usage(e.to_string())
}

fn default_model(kind: ModelKind) -> ModelSpec {
    match kind {
        ModelKind::Rscn => ModelSpec::Rscn(BuildConfig::default()),
        ModelKind::Esn => ModelSpec::esn(BaselineConfig::default()),
        ModelKind::Scr => ModelSpec::scr(BaselineConfig::default()),
    }
}

pub fn model_kind(spec: &ModelSpec) -> ModelKind {
    match spec {
        ModelSpec::Rscn(_) => ModelKind::Rscn,
        ModelSpec::Baseline { config, .. } => match config.topology {
            Topology::EsnRandom => ModelKind::Esn,
            Topology::ScrRing => ModelKind::Scr,
        },
    }
}

/// Applies the size and scaling flags to a model spec.
pub fn apply_model_flags(mut spec: ModelSpec, cli: &Cli) -> Result<ModelSpec, CliError> {
    if let Some(a) = cli.alpha {
        spec = spec.with_param("alpha", a).map_err(usage)?;
    }
    match (&spec, cli.n_max, cli.nodes) {
        (ModelSpec::Rscn(_), Some(n), _) => spec = spec.with_param("n_max", n as f64).map_err(usage)?,
        (ModelSpec::Baseline { .. }, _, Some(n)) => spec = spec.with_param("n_nodes", n as f64).map_err(usage)?,
        _ => {}
    }
    Ok(spec)
}

pub fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let manifest = match &cli.manifest {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::default(),
    };
    let seed = cli.seed.or(manifest.seed).unwrap_or(0);

    let task_name = cli.task.clone().or_else(|| cli.generator.clone());
    let task_given = task_name.is_some() || manifest.task.is_some();
    let mut task = match (task_name, manifest.task) {
        (Some(name), _) => TaskManifest::from_name(&name, seed).map_err(usage)?,
        (None, Some(t)) => t,
        (None, None) => TaskManifest::mackey_glass(MgVariant::Mg, seed),
    };
    if let Some(v) = &cli.variant {
        if task.generator != Some(rscn::tasks::Generator::MackeyGlass) {
            return Err(CliError::usage("--variant applies to the Mackey-Glass generator only"));
        }
        task.variant = Some(v.parse().map_err(usage)?);
    }
    task.seed = seed;

    let model_from_manifest = manifest.model.as_ref().is_some_and(|m| cli.model.is_none_or(|k| model_kind(m) == k));
    let model = match (cli.model, manifest.model) {
        (Some(kind), Some(m)) if model_kind(&m) == kind => m,
        (Some(kind), _) => default_model(kind),
        (None, Some(m)) => m,
        (None, None) => default_model(ModelKind::Rscn),
    };
    let model = apply_model_flags(model, cli)?.with_seed(seed);

    let mut online = manifest.online.unwrap_or_default();
    if let Some(mode) = &cli.mode {
        online.mode = mode.parse::<OnlineMode>().map_err(usage)?;
    }
    if let Some(a) = cli.a {
        online.a = a;
    }
    if let Some(c) = cli.c {
        online.c = c;
    }
    if let Some(phi) = cli.phi {
        online.phi = Phi::Constant(phi);
    }
    online.validate().map_err(usage)?;

    let split = match &cli.split {
        Some(s) => s.parse().map_err(usage)?,
        None => manifest.split.unwrap_or(Split::Test),
    };
    let trials = cli.trials.or(manifest.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }

    Ok(Resolved {
        command: cli.command,
        seed,
        task_given,
        task,
        model_from_manifest,
        model,
        online,
        out: cli
            .out
            .clone()
            .or(manifest.outputs.map(|o| o.dir))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        trials,
        grid: cli.grid.clone().or(manifest.grid),
        model_file: cli.model_file.clone().or(manifest.model_file),
        split,
    })
}
