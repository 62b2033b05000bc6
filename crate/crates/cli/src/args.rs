use std::path::PathBuf;

use clap::{ArgAction, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write train/val/test CSVs for a task
    Gen,
    /// Build a model and write it with its construction history
    Train,
    /// NRMSE of a saved model on one split
    Eval,
    /// Run online readout updates over a split
    Online,
    /// Multi-trial comparison table across models and tasks
    Bench,
    /// Two-trajectory convergence check for a saved model
    EspCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Rscn,
    Esn,
    Scr,
}

#[derive(Debug, Parser)]
#[command(name = "rscn", version, about = "Grow, evaluate and adapt recurrent stochastic configuration networks")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// Task shorthand, same as --task (e.g. `rscn gen mg --variant mg2`)
    pub generator: Option<String>,

    /// JSON run manifest; flags override its fields
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub trials: Option<usize>,

    /// mg, mg1, mg2, plant or csv:PATH
    #[arg(long)]
    pub task: Option<String>,

    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,

    /// Online update rule: basic, decreasing or deadzone
    #[arg(long)]
    pub mode: Option<String>,

    /// Step size of the basic projection update
    #[arg(long)]
    pub a: Option<f64>,

    /// Regulariser of the basic projection update
    #[arg(long)]
    pub c: Option<f64>,

    /// Dead-zone noise bound
    #[arg(long)]
    pub phi: Option<f64>,

    /// Feedback scaling factor
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Grid over model parameters, e.g. "alpha=0.5,0.9;n_max=60,100"
    #[arg(long)]
    pub grid: Option<String>,

    /// Mackey-Glass input set: mg, mg1 or mg2
    #[arg(long)]
    pub variant: Option<String>,

    /// Saved model for eval, online and esp-check
    #[arg(long)]
    pub model_file: Option<PathBuf>,

    /// train, val or test
    #[arg(long)]
    pub split: Option<String>,

    /// Largest reservoir the builder may grow
    #[arg(long)]
    pub n_max: Option<usize>,

    /// Reservoir size of the ESN and SCR baselines
    #[arg(long)]
    pub nodes: Option<usize>,

    /// Drive length for esp-check
    #[arg(long, default_value_t = 500)]
    pub steps: usize,

    /// Initial-state pairs for esp-check
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,

    /// More log output (repeat for more)
    #[arg(short, long, action = ArgAction::Count)]
    pub verbose: u8,
}
