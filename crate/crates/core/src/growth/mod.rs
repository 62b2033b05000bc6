//! Incremental reservoir construction.
//!
//! Start from a small random reservoir, then repeatedly draw pools of random
//! candidate nodes and append the best one that passes the supervisory test
//! `min_q ξ_q >= 0`. After each node the readout is re-solved by least squares.
//! Growth stops at `n_max` nodes, when the training residual drops below
//! `epsilon`, or when the validation error has not decreased for `n_step`
//! consecutive nodes, in which case the last `n_step` nodes are discarded.

mod candidate;

pub use candidate::{candidate_states, score_candidate, CandidateNode};

use std::collections::VecDeque;
use std::io::Write;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::solve_output_weights;
use crate::reservoir::{run_reservoir, Activation, ReservoirModel, StateSequence, Structure};
use crate::seeds::{rng_for, symmetric, Stream};
use crate::spectral::{scale_feedback, RhoEstimator, ScaleMode};
use crate::tasks::SupervisedSequence;
use candidate::{draw_candidates, pool_states, Draw};

/// When and how the feedback matrix is kept contractive during growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EspMode {
    /// Scale the initial block once and clip every candidate's self weight to
    /// `[-esp_alpha, esp_alpha]`. Existing states are never recomputed.
    #[default]
    Incremental,
    /// Rescale the whole feedback matrix after every accepted node and
    /// recompute all states.
    PaperScaled,
    /// Rescale the enlarged feedback matrix before scoring each candidate.
    PerCandidateScaled,
    /// No scaling at all.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub n_init: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub g_max: usize,
    pub lambda_sequence: Vec<f64>,
    pub r_sequence: Vec<f64>,
    pub epsilon: f64,
    pub sparsity: f64,
    pub esp_alpha: f64,
    pub esp_mode: EspMode,
    pub esp_scaling: ScaleMode,
    pub rho_estimator: RhoEstimator,
    /// Overrides the washout carried by the training and validation sequences.
    pub washout: Option<usize>,
    pub ridge: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            n_init: 5,
            n_max: 100,
            n_step: 6,
            g_max: 100,
            lambda_sequence: vec![0.5, 1.0, 5.0, 10.0, 30.0, 50.0, 100.0],
            r_sequence: vec![0.9, 0.99, 0.999, 0.9999, 0.99999],
            epsilon: 1e-6,
            sparsity: 0.03,
            esp_alpha: 0.9,
            esp_mode: EspMode::Incremental,
            esp_scaling: ScaleMode::Contraction,
            rho_estimator: RhoEstimator::SigmaBound,
            washout: None,
            ridge: 0.0,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_init == 0 {
            return bad("n_init must be at least 1".into());
        }
        if self.n_max < self.n_init {
            return bad(format!("n_max {} is below n_init {}", self.n_max, self.n_init));
        }
        if self.n_step == 0 || self.n_step >= self.n_max {
            return bad(format!("n_step must lie in 1..n_max, got {}", self.n_step));
        }
        if self.lambda_sequence.is_empty() || self.lambda_sequence.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("lambda_sequence must be non-empty and strictly positive".into());
        }
        if self.r_sequence.is_empty() || self.r_sequence.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return bad("every r must lie in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return bad(format!("sparsity must lie in [0, 1], got {}", self.sparsity));
        }
        if !(self.esp_alpha > 0.0 && self.esp_alpha < 1.0) {
            return bad(format!("esp_alpha must lie in (0, 1), got {}", self.esp_alpha));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be non-negative".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Snapshot {
    model: ReservoirModel,
    train: StateSequence,
    val: StateSequence,
    residual: DMatrix<f64>,
}

/// Everything the builder tracks between node additions.
#[derive(Debug, Clone)]
pub struct BuildState {
    pub model: ReservoirModel,
    pub train_states: StateSequence,
    pub val_states: StateSequence,
    /// Training residual `T - W_out X` over post-washout columns.
    pub residual: DMatrix<f64>,
    pub residual_norm_history: Vec<f64>,
    pub validation_norm_history: Vec<f64>,
    pub mu_current: f64,
    train_inputs: DMatrix<f64>,
    val_inputs: DMatrix<f64>,
    train_targets: DMatrix<f64>,
    val_targets: DMatrix<f64>,
    train_washout: usize,
    val_washout: usize,
    snapshots: VecDeque<Snapshot>,
}

impl BuildState {
    pub fn n_nodes(&self) -> usize {
        self.model.n_nodes()
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }

    fn effective(&self, seq: &StateSequence, washout: usize) -> DMatrix<f64> {
        seq.extended().columns(washout, seq.len() - washout).into_owned()
    }

    /// Re-solves the readout and refreshes residual and norm histories.
    fn refit(&mut self, ridge: f64) -> Result<()> {
        let x = self.effective(&self.train_states, self.train_washout);
        let w = solve_output_weights(&x, &self.train_targets, ridge)?;
        self.residual = &self.train_targets - &w * &x;
        let xv = self.effective(&self.val_states, self.val_washout);
        let val_norm = (&self.val_targets - &w * &xv).norm();
        self.model.set_readout(w)?;
        self.residual_norm_history.push(self.residual.norm());
        self.validation_norm_history.push(val_norm);
        Ok(())
    }

    fn snapshot(&mut self, keep: usize) {
        self.snapshots.push_back(Snapshot {
            model: self.model.clone(),
            train: self.train_states.clone(),
            val: self.val_states.clone(),
            residual: self.residual.clone(),
        });
        while self.snapshots.len() > keep {
            self.snapshots.pop_front();
        }
    }

    fn rerun_states(&mut self) -> Result<()> {
        let n = self.model.n_nodes();
        self.train_states = run_reservoir(&self.model, &self.train_inputs, &DVector::zeros(n))?;
        self.val_states = run_reservoir(&self.model, &self.val_inputs, &DVector::zeros(n))?;
        Ok(())
    }
}

fn resolve_washout(seq: &SupervisedSequence, over: Option<usize>) -> Result<usize> {
    let w = over.unwrap_or(seq.washout());
    if w >= seq.len() {
        return Err(Error::contract(format!(
            "washout {w} leaves no samples in {} of length {}",
            seq.name(),
            seq.len()
        )));
    }
    Ok(w)
}

/// Draws the initial reservoir of `n_init` nodes, applies the initial
/// scaling (unless `esp_mode` is `None`) and fits the first readout.
pub fn init_network(
    cfg: &BuildConfig,
    train: &SupervisedSequence,
    val: &SupervisedSequence,
    rng: &mut impl Rng,
) -> Result<BuildState> {
    cfg.validate()?;
    if train.n_inputs() != val.n_inputs() || train.n_outputs() != val.n_outputs() {
        return Err(Error::contract("training and validation sequences differ in shape"));
    }
    let n = cfg.n_init;
    let k = train.n_inputs();
    let l = train.n_outputs();
    let lambda = cfg.lambda_sequence[0];

    let input_weights = DMatrix::from_fn(n, k, |_, _| symmetric(rng, lambda));
    let biases = DVector::from_fn(n, |_, _| symmetric(rng, lambda));
    let mut feedback = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if rng.random::<f64>() < cfg.sparsity {
                feedback[(i, j)] = symmetric(rng, lambda);
            }
        }
    }
    let mut model = ReservoirModel::new(
        input_weights,
        feedback,
        biases,
        DMatrix::zeros(l, n + k),
        cfg.activation,
        Structure::BlockLowerTriangular,
        n,
    )?;
    if cfg.esp_mode != EspMode::None {
        model = scale_feedback(&model, cfg.esp_alpha, cfg.esp_scaling, cfg.rho_estimator)?.model;
    }

    let train_washout = resolve_washout(train, cfg.washout)?;
    let val_washout = resolve_washout(val, cfg.washout)?;
    let train_states = run_reservoir(&model, train.inputs(), &DVector::zeros(n))?;
    let val_states = run_reservoir(&model, val.inputs(), &DVector::zeros(n))?;
    let eff = |s: &SupervisedSequence, w: usize| s.targets().columns(w, s.len() - w).into_owned();

    let mut state = BuildState {
        model,
        train_states,
        val_states,
        residual: DMatrix::zeros(l, 0),
        residual_norm_history: Vec::new(),
        validation_norm_history: Vec::new(),
        mu_current: 0.0,
        train_inputs: train.inputs().clone(),
        val_inputs: val.inputs().clone(),
        train_targets: eff(train, train_washout),
        val_targets: eff(val, val_washout),
        train_washout,
        val_washout,
        snapshots: VecDeque::new(),
    };
    state.refit(cfg.ridge)?;
    state.snapshot(cfg.n_step + 1);
    Ok(state)
}

/// Candidate-pool outcome of one `(λ, r)` attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolStats {
    pub accepted: usize,
    pub total: usize,
}

/// Model with the drawn node appended: new row below, new column zero except
/// for the self weight.
fn appended_model(model: &ReservoirModel, d: &Draw) -> ReservoirModel {
    let n = model.n_nodes();
    let k = model.n_inputs();
    let l = model.n_outputs();
    let mut input_weights = model.input_weights().clone().insert_row(n, 0.0);
    input_weights.row_mut(n).copy_from(&d.input_row.transpose());
    let mut feedback = model.feedback().clone().insert_row(n, 0.0).insert_column(n, 0.0);
    for j in 0..=n {
        feedback[(n, j)] = d.feedback_row[j];
    }
    let biases = model.biases().clone().push(d.bias);
    ReservoirModel {
        input_weights,
        feedback,
        biases,
        readout: DMatrix::zeros(l, n + 1 + k),
        activation: model.activation(),
        structure: model.structure(),
        initial_block_size: model.initial_block_size(),
    }
}

fn rescale(model: &ReservoirModel, cfg: &BuildConfig) -> Result<ReservoirModel> {
    Ok(scale_feedback(model, cfg.esp_alpha, cfg.esp_scaling, cfg.rho_estimator)?.model)
}

/// Draws `g_max` candidates on `[-lambda, lambda]`, keeps those with
/// `min_q ξ_q >= 0` and returns the one with the largest total score (the
/// earliest draw on ties).
pub fn configure_node(
    state: &BuildState,
    cfg: &BuildConfig,
    lambda: f64,
    r: f64,
    rng: &mut impl Rng,
) -> Result<(Option<CandidateNode>, PoolStats)> {
    let n = state.n_nodes();
    let k = state.model.n_inputs();
    let mu = (1.0 - r) / (n as f64 + 1.0);
    let clamp = (cfg.esp_mode == EspMode::Incremental).then_some(cfg.esp_alpha);
    let draws = draw_candidates(rng, k, n, cfg.g_max, lambda, clamp);

    let states: Vec<DVector<f64>> = match cfg.esp_mode {
        EspMode::PerCandidateScaled => draws
            .par_iter()
            .map(|d| {
                let m = rescale(&appended_model(&state.model, d), cfg)?;
                let seq = run_reservoir(&m, &state.train_inputs, &DVector::zeros(n + 1))?;
                Ok(seq.states().row(n).transpose())
            })
            .collect::<Result<_>>()?,
        _ => pool_states(&state.train_states, &draws, cfg.activation),
    };

    let w = state.train_washout;
    let n_eff = state.residual.ncols();
    let scored: Vec<(f64, DVector<f64>)> = states
        .par_iter()
        .map(|g| score_candidate(&state.residual, g.rows(w, n_eff), r, mu))
        .collect();

    let mut best: Option<usize> = None;
    let mut accepted = 0;
    for (i, (xi, per)) in scored.iter().enumerate() {
        if per.min() >= 0.0 && xi.is_finite() {
            accepted += 1;
            if best.is_none_or(|b| *xi > scored[b].0) {
                best = Some(i);
            }
        }
    }
    let stats = PoolStats {
        accepted,
        total: draws.len(),
    };
    let node = best.map(|i| {
        let d = &draws[i];
        CandidateNode {
            input_row: d.input_row.clone(),
            feedback_row: d.feedback_row.clone(),
            bias: d.bias,
            state_seq: states[i].clone(),
            score: scored[i].0,
            per_output_scores: scored[i].1.clone(),
        }
    });
    Ok((node, stats))
}

/// Appends an accepted node, applies the configured scaling and refits.
fn accept_node(state: &mut BuildState, cfg: &BuildConfig, node: &CandidateNode) -> Result<()> {
    let draw = Draw {
        input_row: node.input_row.clone(),
        feedback_row: node.feedback_row.clone(),
        bias: node.bias,
    };
    let grown = appended_model(&state.model, &draw);
    match cfg.esp_mode {
        EspMode::Incremental | EspMode::None => {
            let val_g = pool_states(&state.val_states, std::slice::from_ref(&draw), cfg.activation).remove(0);
            state.train_states.append_node(&node.state_seq);
            state.val_states.append_node(&val_g);
            state.model = grown;
        }
        EspMode::PaperScaled | EspMode::PerCandidateScaled => {
            state.model = rescale(&grown, cfg)?;
            state.rerun_states()?;
        }
    }
    state.refit(cfg.ridge)
}

/// One row of the construction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub size: usize,
    pub lambda: Option<f64>,
    pub r: Option<f64>,
    pub xi_best: Option<f64>,
    pub train_norm: f64,
    pub val_norm: f64,
    pub pool_accepted: usize,
    pub pool_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOrder {
    /// λ in the outer loop, r advanced first on empty pools.
    LambdaOuter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSize,
    Tolerance,
    EarlyStop,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildHistory {
    /// One record per reservoir size reached, including sizes later rolled
    /// back.
    pub records: Vec<GrowthRecord>,
    pub stalled: bool,
    /// Size at which early stopping fired, if it did.
    pub rolled_back_from: Option<usize>,
    pub final_size: usize,
    pub stop_reason: StopReason,
    pub search_order: SearchOrder,
}

impl BuildHistory {
    /// CSV with columns `size,lambda,r,xi_best,train_norm,val_norm,pool_accepted,pool_total`.
    /// The initial reservoir has empty `lambda`, `r` and `xi_best`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut wtr = ::csv::Writer::from_writer(out);
        wtr.write_record(["size", "lambda", "r", "xi_best", "train_norm", "val_norm", "pool_accepted", "pool_total"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for rec in &self.records {
            wtr.write_record([
                rec.size.to_string(),
                opt(rec.lambda),
                opt(rec.r),
                opt(rec.xi_best),
                format!("{}", rec.train_norm),
                format!("{}", rec.val_norm),
                rec.pool_accepted.to_string(),
                rec.pool_total.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// The last `n_step + 1` validation norms never decrease.
fn early_stop_triggered(val: &[f64], n_step: usize) -> bool {
    val.len() > n_step && val[val.len() - n_step - 1..].windows(2).all(|w| w[1] >= w[0])
}

/// Grows a reservoir on `train`, using `val` for early stopping.
///
/// All randomness comes from `cfg.seed`: the initial reservoir uses the
/// `Init` stream and the candidate pools the `Candidates` stream.
pub fn build_rscn(
    train: &SupervisedSequence,
    val: &SupervisedSequence,
    cfg: &BuildConfig,
) -> Result<(ReservoirModel, BuildHistory)> {
    let mut init_rng = rng_for(cfg.seed, Stream::Init);
    let mut cand_rng = rng_for(cfg.seed, Stream::Candidates);
    let mut state = init_network(cfg, train, val, &mut init_rng)?;
    grow(&mut state, cfg, &mut cand_rng)
}

/// Runs the growth loop on an initialised state.
pub fn grow(state: &mut BuildState, cfg: &BuildConfig, rng: &mut impl Rng) -> Result<(ReservoirModel, BuildHistory)> {
    let mut records = vec![GrowthRecord {
        size: state.n_nodes(),
        lambda: None,
        r: None,
        xi_best: None,
        train_norm: state.residual_norm(),
        val_norm: *state.validation_norm_history.last().unwrap_or(&f64::NAN),
        pool_accepted: 0,
        pool_total: 0,
    }];
    let mut rolled_back_from = None;

    let stop_reason = 'grow: loop {
        if early_stop_triggered(&state.validation_norm_history, cfg.n_step) {
            let from = state.n_nodes();
            let snap = state.snapshots.pop_front().expect("snapshots cover n_step + 1 sizes");
            state.model = snap.model;
            state.train_states = snap.train;
            state.val_states = snap.val;
            state.residual = snap.residual;
            state.snapshots.clear();
            debug!("early stop at {from} nodes, rolled back to {}", state.n_nodes());
            rolled_back_from = Some(from);
            break StopReason::EarlyStop;
        }
        if state.n_nodes() >= cfg.n_max {
            break StopReason::MaxSize;
        }
        if state.residual_norm() <= cfg.epsilon {
            break StopReason::Tolerance;
        }

        let mut total = 0;
        for &lambda in &cfg.lambda_sequence {
            for &r in &cfg.r_sequence {
                state.mu_current = (1.0 - r) / (state.n_nodes() as f64 + 1.0);
                let (node, stats) = configure_node(state, cfg, lambda, r, rng)?;
                total += stats.total;
                if let Some(node) = node {
                    accept_node(state, cfg, &node)?;
                    state.snapshot(cfg.n_step + 1);
                    records.push(GrowthRecord {
                        size: state.n_nodes(),
                        lambda: Some(lambda),
                        r: Some(r),
                        xi_best: Some(node.score),
                        train_norm: state.residual_norm(),
                        val_norm: *state.validation_norm_history.last().expect("refit records a norm"),
                        pool_accepted: stats.accepted,
                        pool_total: total,
                    });
                    continue 'grow;
                }
            }
        }
        break StopReason::Stalled;
    };

    info!(
        "grown to {} nodes ({stop_reason:?}), training residual {:.3e}",
        state.n_nodes(),
        state.residual_norm()
    );
    let history = BuildHistory {
        records,
        stalled: stop_reason == StopReason::Stalled,
        rolled_back_from,
        final_size: state.n_nodes(),
        stop_reason,
        search_order: SearchOrder::LambdaOuter,
    };
    Ok((state.model.clone(), history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{rng_for, Stream};

    fn seq(inputs: DMatrix<f64>, targets: DMatrix<f64>, washout: usize) -> SupervisedSequence {
        SupervisedSequence::new(inputs, targets, washout, "t").unwrap()
    }

    fn sine_task(len: usize, phase: f64) -> SupervisedSequence {
        let u = DMatrix::from_fn(1, len, |_, t| ((t as f64 + phase) * 0.2).sin());
        let y = DMatrix::from_fn(1, len, |_, t| ((t as f64 + phase) * 0.2).sin().powi(3) + 0.3 * ((t as f64 + phase) * 0.05).cos());
        seq(u, y, 10)
    }

    fn small_cfg() -> BuildConfig {
        BuildConfig {
            n_max: 20,
            n_step: 3,
            g_max: 20,
            ..BuildConfig::default()
        }
    }

    #[test]
    fn zero_sparsity_gives_zero_feedback() {
        let cfg = BuildConfig {
            sparsity: 0.0,
            ..small_cfg()
        };
        let t = sine_task(60, 0.0);
        let s = init_network(&cfg, &t, &t, &mut rng_for(0, Stream::Init)).unwrap();
        assert!(s.model.feedback().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_cfg();
        let t = sine_task(60, 0.0);
        let a = init_network(&cfg, &t, &t, &mut rng_for(4, Stream::Init)).unwrap();
        let b = init_network(&cfg, &t, &t, &mut rng_for(4, Stream::Init)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.residual, b.residual);
    }

    #[test]
    fn initial_sparsity_mean() {
        // 25 entries at density 0.03: binomial mean 0.75
        let cfg = BuildConfig {
            esp_mode: EspMode::None,
            ..BuildConfig::default()
        };
        let t = sine_task(30, 0.0);
        let total: usize = (0..1000)
            .map(|s| {
                let st = init_network(&cfg, &t, &t, &mut rng_for(s, Stream::Init)).unwrap();
                st.model.feedback().iter().filter(|&&v| v != 0.0).count()
            })
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((0.5..=1.0).contains(&mean), "mean nonzero count {mean}");
    }

    #[test]
    fn zero_targets_stop_at_init() {
        let u = DMatrix::from_fn(1, 50, |_, t| (t as f64).sin());
        let t = seq(u, DMatrix::zeros(1, 50), 5);
        let (model, hist) = build_rscn(&t, &t, &small_cfg()).unwrap();
        assert_eq!(model.n_nodes(), 5);
        assert_eq!(hist.stop_reason, StopReason::Tolerance);
        assert_eq!(hist.records.len(), 1);
    }

    #[test]
    fn passthrough_needs_no_nodes() {
        let u = DMatrix::from_fn(1, 50, |_, t| (t as f64 * 0.7).sin());
        let t = seq(u.clone(), u, 5);
        let (model, hist) = build_rscn(&t, &t, &small_cfg()).unwrap();
        assert_eq!(model.n_nodes(), 5);
        assert!(hist.records[0].train_norm < 1e-6);
    }

    #[test]
    fn configure_node_edge_cases() {
        let cfg = BuildConfig { g_max: 0, ..small_cfg() };
        let t = sine_task(60, 0.0);
        let s = init_network(&cfg, &t, &t, &mut rng_for(0, Stream::Init)).unwrap();
        let (node, stats) = configure_node(&s, &cfg, 1.0, 0.9, &mut rng_for(0, Stream::Candidates)).unwrap();
        assert!(node.is_none());
        assert_eq!(stats.total, 0);

        let cfg = small_cfg();
        let a = configure_node(&s, &cfg, 1.0, 0.99, &mut rng_for(1, Stream::Candidates)).unwrap();
        let b = configure_node(&s, &cfg, 1.0, 0.99, &mut rng_for(1, Stream::Candidates)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn representable_direction_is_accepted() {
        // The direct link cannot express a cubed tanh of the input, so the
        // residual keeps a component any nonlinear candidate correlates with.
        let u = DMatrix::from_fn(1, 80, |_, t| 1.5 * (t as f64 * 0.37).sin());
        let y = u.map(|v| v.tanh().powi(3));
        let t = seq(u, y, 0);
        let cfg = BuildConfig {
            n_init: 1,
            sparsity: 0.0,
            ..small_cfg()
        };
        let s = init_network(&cfg, &t, &t, &mut rng_for(2, Stream::Init)).unwrap();
        let (node, stats) = configure_node(&s, &cfg, 1.0, 0.999, &mut rng_for(2, Stream::Candidates)).unwrap();
        let node = node.expect("some candidate passes");
        assert!(node.score > 0.0);
        assert!(node.min_output_score() >= 0.0);
        assert!(stats.accepted >= 1);
    }

    #[test]
    fn growth_keeps_structure_and_monotone_residual() {
        let train = sine_task(150, 0.0);
        let val = sine_task(80, 150.0);
        let cfg = small_cfg();
        let (model, hist) = build_rscn(&train, &val, &cfg).unwrap();
        assert!(model.has_triangular_growth());
        for w in hist.records.windows(2) {
            assert!(w[1].train_norm <= w[0].train_norm * (1.0 + 1e-12) + 1e-12);
        }
        for rec in &hist.records[1..] {
            assert!(rec.xi_best.unwrap() >= 0.0);
        }
        let again = build_rscn(&train, &val, &cfg).unwrap();
        assert_eq!(again.0, model);
        assert_eq!(again.1, hist);
    }

    #[test]
    fn scaled_modes_run() {
        let train = sine_task(100, 0.0);
        let val = sine_task(60, 100.0);
        for mode in [EspMode::PaperScaled, EspMode::PerCandidateScaled, EspMode::None] {
            let cfg = BuildConfig {
                esp_mode: mode,
                n_max: 10,
                g_max: 10,
                ..small_cfg()
            };
            let (model, _) = build_rscn(&train, &val, &cfg).unwrap();
            assert!(model.has_triangular_growth());
            if mode != EspMode::None {
                let sigma = crate::spectral::max_singular_value(model.feedback());
                assert!(sigma <= cfg.esp_alpha + 1e-9, "{mode:?}: {sigma}");
            }
        }
    }

    #[test]
    fn early_stop_rule() {
        assert!(early_stop_triggered(&[3.0, 2.0, 2.0, 2.5, 2.6], 3));
        assert!(!early_stop_triggered(&[3.0, 2.0, 2.0, 1.5, 2.6], 3));
        assert!(!early_stop_triggered(&[1.0, 2.0, 3.0], 3));
    }

    #[test]
    fn history_csv_columns() {
        let train = sine_task(80, 0.0);
        let (_, hist) = build_rscn(&train, &train, &BuildConfig { n_max: 8, n_step: 2, g_max: 10, ..BuildConfig::default() }).unwrap();
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "size,lambda,r,xi_best,train_norm,val_norm,pool_accepted,pool_total");
        assert_eq!(lines.count(), hist.records.len());
    }

    #[test]
    fn invalid_config_rejected() {
        let t = sine_task(40, 0.0);
        for cfg in [
            BuildConfig { n_step: 100, ..BuildConfig::default() },
            BuildConfig { r_sequence: vec![1.0], ..BuildConfig::default() },
            BuildConfig { lambda_sequence: vec![], ..BuildConfig::default() },
            BuildConfig { sparsity: 1.5, ..BuildConfig::default() },
        ] {
            assert!(matches!(build_rscn(&t, &t, &cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
