//! Recurrent stochastic configuration networks (RSCN).
//!
//! A reservoir-computing toolkit built around incremental construction: the
//! reservoir starts small and grows one node at a time, each node drawn at
//! random and kept only if it passes a supervisory inequality against the
//! current training residual. The feedback matrix keeps a block
//! lower-triangular shape so that appending a node never disturbs the states
//! of existing nodes.
//!
//! Modules:
//!
//! - [`reservoir`]: the network model, state recursion and readout.
//! - [`spectral`]: largest singular value, spectral radius and feedback scaling.
//! - [`lstsq`]: least-squares readout solve.
//! - [`growth`]: incremental construction with validation early stopping.
//! - [`online`]: projection-based online readout updates.
//! - [`baselines`]: classical ESN and simple cycle reservoir.
//! - [`tasks`]: benchmark generators, CSV ingestion and task manifests.
//! - [`eval`]: NRMSE, multi-trial runs, grid search and report tables.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod growth;
pub mod lstsq;
pub mod online;
pub mod reservoir;
pub mod seeds;
pub mod spectral;
pub mod tasks;

pub use baselines::{build_baseline, build_esn, build_scr, BaselineConfig, Topology};
pub use error::{Error, Result};
pub use eval::{
    emit_report, grid_search, nrmse, run_trials, run_trials_on, split_nrmse, MeanStd, ModelSpec, ReportFormat, TrialReport,
};
pub use growth::{build_rscn, BuildConfig, BuildHistory, CandidateNode, EspMode};
pub use lstsq::solve_output_weights;
pub use online::{online_run, OnlineConfig, OnlineMode, OnlineRun, OnlineState, Phi};
pub use reservoir::{
    readout, run_reservoir, two_trajectory_gap, Activation, EspTrace, ReservoirModel, StateSequence, Structure,
};
pub use spectral::{max_singular_value, scale_feedback, spectral_radius, RhoEstimator, ScaleMode};
pub use tasks::{SupervisedSequence, Split, Task, TaskManifest};

pub use nalgebra::{DMatrix, DVector};
