//! Projection-based online readout updates.
//!
//! The reservoir weights stay fixed; only `W_out` moves. Each step sees the
//! extended state `g = [x(n); u(n)]` and the revealed target `y(n)`:
//!
//! - basic: `W ← W + a (y − W g) gᵀ / (c + gᵀg)` with `0 < a <= 1`, `c > 0`;
//! - decreasing gain: `W ← W + (y − W g) gᵀ / Σ_{l<=n} gᵀg`;
//! - dead zone: the basic step with `a = c = 1`, applied only when some
//!   output's a-priori error exceeds `2 φ(n)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{run_reservoir, ReservoirModel};
use crate::tasks::SupervisedSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineMode {
    #[default]
    Basic,
    DecreasingGain,
    DeadZone,
}

impl std::str::FromStr for OnlineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(OnlineMode::Basic),
            "decreasing" | "decreasing_gain" => Ok(OnlineMode::DecreasingGain),
            "deadzone" | "dead_zone" => Ok(OnlineMode::DeadZone),
            other => Err(Error::InvalidConfig(format!("unknown online mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for OnlineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OnlineMode::Basic => "basic",
            OnlineMode::DecreasingGain => "decreasing_gain",
            OnlineMode::DeadZone => "dead_zone",
        })
    }
}

/// Dead-zone noise bound, either constant or one value per stream step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Phi {
    Constant(f64),
    Series(Vec<f64>),
}

impl Default for Phi {
    fn default() -> Self {
        Phi::Constant(0.0)
    }
}

impl Phi {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            Phi::Constant(v) => *v,
            Phi::Series(s) => s.get(n).copied().unwrap_or_else(|| s.last().copied().unwrap_or(0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub mode: OnlineMode,
    pub a: f64,
    pub c: f64,
    pub phi: Phi,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            mode: OnlineMode::Basic,
            a: 1.0,
            c: 1.0,
            phi: Phi::default(),
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == OnlineMode::Basic && !(self.a > 0.0 && self.a <= 1.0 && self.c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "basic projection needs 0 < a <= 1 and c > 0, got a = {}, c = {}",
                self.a, self.c
            )));
        }
        let phis: &[f64] = match &self.phi {
            Phi::Constant(v) => std::slice::from_ref(v),
            Phi::Series(s) => s,
        };
        if phis.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidConfig("phi must be non-negative".into()));
        }
        Ok(())
    }
}

/// What one update did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// `y − W(n−1) g`
    pub prior_error: DVector<f64>,
    /// `y − W(n) g`
    pub posterior_error: DVector<f64>,
    /// Effective gain: `a` for basic, `1/Σ gᵀg` for decreasing gain, 0 or 1
    /// for the dead zone.
    pub eta: f64,
    /// `‖W(n) − W_ref‖_F` when a reference was supplied.
    pub weight_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    pub readout: DMatrix<f64>,
    pub accumulated_gain: f64,
    pub step: usize,
    pub diagnostics: Vec<StepDiagnostics>,
    pub w_ref: Option<DMatrix<f64>>,
}

impl OnlineState {
    pub fn new(readout: DMatrix<f64>, w_ref: Option<DMatrix<f64>>) -> Result<Self> {
        if let Some(r) = &w_ref {
            if r.shape() != readout.shape() {
                return Err(Error::contract("reference weights differ in shape from the readout"));
            }
        }
        Ok(OnlineState {
            readout,
            accumulated_gain: 0.0,
            step: 0,
            diagnostics: Vec::new(),
            w_ref,
        })
    }

    fn check(&self, g: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if g.len() != self.readout.ncols() || y.len() != self.readout.nrows() {
            return Err(Error::contract(format!(
                "step needs g of length {} and y of length {}, got {} and {}",
                self.readout.ncols(),
                self.readout.nrows(),
                g.len(),
                y.len()
            )));
        }
        if !g.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::contract("online step received non-finite values"));
        }
        Ok(())
    }

    fn record(&mut self, g: &DVector<f64>, y: &DVector<f64>, prior: DVector<f64>, eta: f64) {
        let posterior = y - &self.readout * g;
        let weight_gap = self.w_ref.as_ref().map(|r| (&self.readout - r).norm());
        self.step += 1;
        self.diagnostics.push(StepDiagnostics {
            prior_error: prior,
            posterior_error: posterior,
            eta,
            weight_gap,
        });
    }

    /// `W ← W + a e gᵀ / (c + gᵀg)` with `e = y − W g`.
    pub fn project_step(&mut self, g: &DVector<f64>, y: &DVector<f64>, a: f64, c: f64) -> Result<()> {
        self.check(g, y)?;
        let prior = y - &self.readout * g;
        let gg = g.dot(g);
        let denom = c + gg;
        if denom > 0.0 {
            self.readout.ger(a / denom, &prior, g, 1.0);
        }
        self.record(g, y, prior, a);
        Ok(())
    }

    /// `W ← W + e gᵀ / Σ gᵀg`; skipped while the accumulated gain is zero.
    pub fn project_step_decreasing(&mut self, g: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        self.check(g, y)?;
        let prior = y - &self.readout * g;
        self.accumulated_gain += g.dot(g);
        let eta = if self.accumulated_gain > 0.0 {
            let eta = 1.0 / self.accumulated_gain;
            self.readout.ger(eta, &prior, g, 1.0);
            eta
        } else {
            0.0
        };
        self.record(g, y, prior, eta);
        Ok(())
    }

    /// Basic step with `a = c = 1` applied to each output row whose
    /// `|e_q| > 2 φ`; rows inside the dead zone are left untouched. Gating per
    /// row keeps every row's distance to the true weights non-increasing.
    pub fn project_step_deadzone(&mut self, g: &DVector<f64>, y: &DVector<f64>, phi: f64) -> Result<()> {
        self.check(g, y)?;
        if phi.is_nan() || phi < 0.0 {
            return Err(Error::contract("phi must be non-negative"));
        }
        let prior = y - &self.readout * g;
        let denom = 1.0 + g.dot(g);
        let mut fired = false;
        for (q, &e) in prior.iter().enumerate() {
            if e.abs() > 2.0 * phi {
                fired = true;
                let step = g.transpose() * (e / denom);
                let mut row = self.readout.row_mut(q);
                row += step;
            }
        }
        let eta = if fired { 1.0 } else { 0.0 };
        self.record(g, y, prior, eta);
        Ok(())
    }

    pub fn apply(&mut self, cfg: &OnlineConfig, g: &DVector<f64>, y: &DVector<f64>, n: usize) -> Result<()> {
        match cfg.mode {
            OnlineMode::Basic => self.project_step(g, y, cfg.a, cfg.c),
            OnlineMode::DecreasingGain => self.project_step_decreasing(g, y),
            OnlineMode::DeadZone => self.project_step_deadzone(g, y, cfg.phi.at(n)),
        }
    }
}

/// Output of [`online_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRun {
    /// Prediction at every stream step, made before that step's update.
    pub predictions: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    /// Stream index of the first update; earlier steps are washout.
    pub first_update: usize,
    pub state: OnlineState,
}

impl OnlineRun {
    /// CSV with `n, target_*, prediction_*, prior_err_norm, posterior_err_norm,
    /// eta, weight_gap`. Washout rows have empty diagnostic fields.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let l = self.targets.nrows();
        let mut wtr = ::csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend((1..=l).map(|q| format!("target_{q}")));
        header.extend((1..=l).map(|q| format!("prediction_{q}")));
        header.extend(["prior_err_norm", "posterior_err_norm", "eta", "weight_gap"].map(String::from));
        wtr.write_record(&header)?;
        for t in 0..self.targets.ncols() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(self.targets.column(t).iter().map(|v| format!("{v}")));
            row.extend(self.predictions.column(t).iter().map(|v| format!("{v}")));
            match t.checked_sub(self.first_update).and_then(|i| self.state.diagnostics.get(i)) {
                Some(d) => {
                    row.push(format!("{}", d.prior_error.norm()));
                    row.push(format!("{}", d.posterior_error.norm()));
                    row.push(format!("{}", d.eta));
                    row.push(d.weight_gap.map(|g| format!("{g}")).unwrap_or_default());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the frozen reservoir over `stream` from the zero state. At each step
/// the prediction uses the current weights; after the washout the revealed
/// target then drives one update.
pub fn online_run(
    model: &ReservoirModel,
    stream: &SupervisedSequence,
    cfg: &OnlineConfig,
    w_ref: Option<&DMatrix<f64>>,
) -> Result<OnlineRun> {
    cfg.validate()?;
    if stream.n_inputs() != model.n_inputs() || stream.n_outputs() != model.n_outputs() {
        return Err(Error::contract(format!(
            "stream is {}→{}, model is {}→{}",
            stream.n_inputs(),
            stream.n_outputs(),
            model.n_inputs(),
            model.n_outputs()
        )));
    }
    let seq = run_reservoir(model, stream.inputs(), &DVector::zeros(model.n_nodes()))?;
    let mut state = OnlineState::new(model.readout().clone(), w_ref.cloned())?;
    let t_len = stream.len();
    let mut predictions = DMatrix::zeros(model.n_outputs(), t_len);
    for t in 0..t_len {
        let g = seq.extended().column(t).into_owned();
        predictions.set_column(t, &(&state.readout * &g));
        if t >= stream.washout() {
            let y = stream.targets().column(t).into_owned();
            state.apply(cfg, &g, &y, t)?;
        }
    }
    Ok(OnlineRun {
        predictions,
        targets: stream.targets().clone(),
        first_update: stream.washout(),
        state,
    })
}
