//! Fixed-size reservoirs for comparison: the classical random ESN and a simple
//! cycle reservoir (SCR).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::solve_output_weights;
use crate::reservoir::{run_reservoir, Activation, ReservoirModel, Structure};
use crate::seeds::{rng_for, symmetric, Stream};
use crate::spectral::{scale_feedback, RhoEstimator, ScaleMode};
use crate::tasks::SupervisedSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    EsnRandom,
    ScrRing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub n_nodes: usize,
    pub lambda: f64,
    pub sparsity: f64,
    pub esp_alpha: f64,
    pub topology: Topology,
    pub ring_weight: f64,
    pub esp_scaling: ScaleMode,
    pub rho_estimator: RhoEstimator,
    pub washout: Option<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_nodes: 100,
            lambda: 1.0,
            sparsity: 0.03,
            esp_alpha: 0.9,
            topology: Topology::EsnRandom,
            ring_weight: 0.9,
            esp_scaling: ScaleMode::Contraction,
            rho_estimator: RhoEstimator::SigmaBound,
            washout: None,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidConfig("n_nodes must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::InvalidConfig(format!("sparsity must lie in [0, 1], got {}", self.sparsity)));
        }
        if !(self.esp_alpha > 0.0 && self.esp_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("esp_alpha must lie in (0, 1), got {}", self.esp_alpha)));
        }
        if self.topology == Topology::ScrRing && (self.ring_weight.is_nan() || self.ring_weight.abs() >= 1.0) {
            return Err(Error::InvalidConfig(format!("ring weight must satisfy |w| < 1, got {}", self.ring_weight)));
        }
        Ok(())
    }
}

fn dense_inputs(rng: &mut impl Rng, n: usize, k: usize, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let w_in = DMatrix::from_fn(n, k, |_, _| symmetric(rng, lambda));
    let b = DVector::from_fn(n, |_, _| symmetric(rng, lambda));
    (w_in, b)
}

fn fit_readout(mut model: ReservoirModel, train: &SupervisedSequence, washout: Option<usize>, ridge: f64) -> Result<ReservoirModel> {
    let w = washout.unwrap_or(train.washout());
    if w >= train.len() {
        return Err(Error::contract(format!("washout {w} too long for {}", train.len())));
    }
    let seq = run_reservoir(&model, train.inputs(), &DVector::zeros(model.n_nodes()))?;
    let n_eff = train.len() - w;
    let x = seq.extended().columns(w, n_eff).into_owned();
    let t = train.targets().columns(w, n_eff).into_owned();
    model.set_readout(solve_output_weights(&x, &t, ridge)?)?;
    Ok(model)
}

/// Random sparse reservoir scaled to `esp_alpha`, readout by least squares.
pub fn build_esn(cfg: &BaselineConfig, train: &SupervisedSequence, ridge: f64) -> Result<ReservoirModel> {
    cfg.validate()?;
    if cfg.topology != Topology::EsnRandom {
        return Err(Error::InvalidConfig("build_esn needs topology esn_random".into()));
    }
    let n = cfg.n_nodes;
    let k = train.n_inputs();
    let mut rng = rng_for(cfg.seed, Stream::Init);
    let (w_in, b) = dense_inputs(&mut rng, n, k, cfg.lambda);
    let mut feedback = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if rng.random::<f64>() < cfg.sparsity {
                feedback[(i, j)] = symmetric(&mut rng, cfg.lambda);
            }
        }
    }
    let model = ReservoirModel::new(
        w_in,
        feedback,
        b,
        DMatrix::zeros(train.n_outputs(), n + k),
        cfg.activation,
        Structure::General,
        n,
    )?;
    let model = scale_feedback(&model, cfg.esp_alpha, cfg.esp_scaling, cfg.rho_estimator)?.model;
    fit_readout(model, train, cfg.washout, ridge)
}

/// Single directed ring `W_r[i][(i-1) mod N] = ring_weight`; inputs and
/// readout as for the ESN.
pub fn build_scr(cfg: &BaselineConfig, train: &SupervisedSequence, ridge: f64) -> Result<ReservoirModel> {
    cfg.validate()?;
    if cfg.topology != Topology::ScrRing {
        return Err(Error::InvalidConfig("build_scr needs topology scr_ring".into()));
    }
    let n = cfg.n_nodes;
    let k = train.n_inputs();
    let mut rng = rng_for(cfg.seed, Stream::Init);
    let (w_in, b) = dense_inputs(&mut rng, n, k, cfg.lambda);
    let mut feedback = DMatrix::zeros(n, n);
    for i in 0..n {
        feedback[(i, (i + n - 1) % n)] += cfg.ring_weight;
    }
    let model = ReservoirModel::new(
        w_in,
        feedback,
        b,
        DMatrix::zeros(train.n_outputs(), n + k),
        cfg.activation,
        Structure::General,
        n,
    )?;
    fit_readout(model, train, cfg.washout, ridge)
}

/// Dispatches on `cfg.topology`.
pub fn build_baseline(cfg: &BaselineConfig, train: &SupervisedSequence, ridge: f64) -> Result<ReservoirModel> {
    match cfg.topology {
        Topology::EsnRandom => build_esn(cfg, train, ridge),
        Topology::ScrRing => build_scr(cfg, train, ridge),
    }
}
