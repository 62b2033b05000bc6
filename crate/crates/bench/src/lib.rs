//! Shared fixtures for the kernel benchmarks.

use rscn::growth::{init_network, BuildState};
use rscn::seeds::{rng_for, Stream};
use rscn::tasks::MgVariant;
use rscn::{build_esn, BaselineConfig, BuildConfig, DMatrix, ReservoirModel, Task, TaskManifest};

pub fn mg_task() -> Task {
    TaskManifest::mackey_glass(MgVariant::Mg, 0).build().expect("mackey-glass task")
}

/// ESN of `n` nodes fitted to the MG training split.
pub fn esn_model(task: &Task, n: usize) -> ReservoirModel {
    let cfg = BaselineConfig {
        n_nodes: n,
        ..BaselineConfig::default()
    };
    build_esn(&cfg, &task.train, 0.0).expect("esn build")
}

/// Deterministic dense matrix with entries in [-1, 1].
pub fn dense(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| ((i * 7919 + j * 104_729 + 1) as f64).sin())
}

/// Builder state right after the initial reservoir has been fitted.
pub fn initial_build_state(task: &Task, cfg: &BuildConfig) -> BuildState {
    let mut rng = rng_for(cfg.seed, Stream::Init);
    init_network(cfg, &task.train, &task.val, &mut rng).expect("initial network")
}
