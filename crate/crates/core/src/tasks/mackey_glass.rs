//! Mackey-Glass delay differential equation and its forecasting tasks.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SupervisedSequence, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgParams {
    pub upsilon: f64,
    pub alpha_mg: f64,
    pub tau: usize,
    pub exponent: i32,
    pub dt: f64,
    pub init_range: (f64, f64),
    pub length: usize,
}

impl Default for MgParams {
    fn default() -> Self {
        MgParams {
            upsilon: -0.1,
            alpha_mg: 0.2,
            tau: 17,
            exponent: 10,
            dt: 0.1,
            init_range: (0.1, 1.3),
            length: 1177,
        }
    }
}

impl MgParams {
    fn steps_per_unit(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::InvalidConfig(format!("dt must lie in (0, 1], got {}", self.dt)));
        }
        let k = (1.0 / self.dt).round();
        if ((k * self.dt) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("1/dt must be an integer, got dt = {}", self.dt)));
        }
        Ok(k as usize)
    }
}

/// Integrates `dy/dt = υ y + α y(t-τ) / (1 + y(t-τ)^p)` with the explicit
/// midpoint rule and returns `y(1), …, y(length)`.
///
/// History values at the integer times `-τ, …, 0` are drawn uniformly from
/// `init_range` and joined linearly. Delayed values between grid points are
/// linearly interpolated.
pub fn mackey_glass(p: &MgParams, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if p.tau == 0 {
        return Err(Error::InvalidConfig("tau must be at least 1".into()));
    }
    let spu = p.steps_per_unit()?;
    let (lo, hi) = p.init_range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidConfig(format!("empty init range [{lo}, {hi}]")));
    }
    let history: Vec<f64> = (0..=p.tau).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();

    // Fine grid index k is time -tau + k*dt.
    let lag = p.tau * spu;
    let total = lag + p.length * spu + 1;
    let mut y = Vec::with_capacity(total);
    for k in 0..=lag {
        let unit = k / spu;
        let frac = (k % spu) as f64 / spu as f64;
        let v = if unit == p.tau {
            history[unit]
        } else {
            history[unit] + frac * (history[unit + 1] - history[unit])
        };
        y.push(v);
    }

    let f = |cur: f64, delayed: f64| p.upsilon * cur + p.alpha_mg * delayed / (1.0 + delayed.powi(p.exponent));
    let dt = p.dt;
    for k in lag..total - 1 {
        let d0 = y[k - lag];
        let d_half = 0.5 * (y[k - lag] + y[k - lag + 1]);
        let cur = y[k];
        let mid = cur + 0.5 * dt * f(cur, d0);
        y.push(cur + dt * f(mid, d_half));
    }

    Ok((1..=p.length).map(|t| y[lag + t * spu]).collect())
}

/// Which delayed samples are visible to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MgVariant {
    /// `[y(n), y(n-6), y(n-12), y(n-18)]`
    #[default]
    Mg,
    /// `[y(n-6), y(n-12), y(n-18)]`
    Mg1,
    /// `[y(n-12), y(n-18)]`
    Mg2,
}

impl MgVariant {
    pub fn lags(self) -> &'static [usize] {
        match self {
            MgVariant::Mg => &[0, 6, 12, 18],
            MgVariant::Mg1 => &[6, 12, 18],
            MgVariant::Mg2 => &[12, 18],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MgVariant::Mg => "MG",
            MgVariant::Mg1 => "MG1",
            MgVariant::Mg2 => "MG2",
        }
    }
}

impl std::str::FromStr for MgVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mg" => Ok(MgVariant::Mg),
            "mg1" => Ok(MgVariant::Mg1),
            "mg2" => Ok(MgVariant::Mg2),
            other => Err(Error::InvalidConfig(format!("unknown MG variant {other:?}"))),
        }
    }
}

const MAX_LAG: usize = 18;
const LEAD: usize = 6;
const TRAIN_END: usize = 500;
const VAL_END: usize = 800;
pub(crate) const MG_WASHOUT: usize = 20;

/// Windows a Mackey-Glass series into a forecasting task with target
/// `y(n+6)`.
///
/// Time `n` is 1-based into `series`. Every variant uses the same range of `n`
/// (from 19 up to `len - 6`) so targets are identical across variants. The
/// splits are `n <= 500`, `500 < n <= 800` and the rest.
pub fn mg_task(series: &[f64], variant: MgVariant) -> Result<Task> {
    let len = series.len();
    let first = MAX_LAG + 1;
    if len < VAL_END + LEAD + 2 * MG_WASHOUT + 2 {
        return Err(Error::contract(format!(
            "Mackey-Glass series of length {len} too short for the fixed splits"
        )));
    }
    let last = len - LEAD;
    let y = |t: usize| series[t - 1];
    let lags = variant.lags();

    let window = |from: usize, to: usize, label: &str| -> Result<SupervisedSequence> {
        let count = to - from + 1;
        let inputs = DMatrix::from_fn(lags.len(), count, |i, j| y(from + j - lags[i]));
        let targets = DMatrix::from_fn(1, count, |_, j| y(from + j + LEAD));
        SupervisedSequence::new(inputs, targets, MG_WASHOUT, format!("{}-{label}", variant.name()))
    };

    Task::new(
        variant.name(),
        window(first, TRAIN_END, "train")?,
        window(TRAIN_END + 1, VAL_END, "val")?,
        window(VAL_END + 1, last, "test")?,
    )
}
