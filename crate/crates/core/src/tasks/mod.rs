//! Supervised sequences, benchmark generators and dataset ingestion.

mod csv;
mod mackey_glass;
mod manifest;
mod plant;

pub use self::csv::{load_csv, write_csv, CsvSchema, LagFeature, LagPreset};
pub use self::mackey_glass::{mackey_glass, mg_task, MgParams, MgVariant};
pub use self::manifest::{CsvSplits, Generator, LagSpec, TaskManifest};
pub use self::plant::{plant_simulate, plant_task, test_input, PlantParams, PlantPhase};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs `K × n` and targets `L × n` over discrete time. The first `washout`
/// columns drive the reservoir but are excluded from fitting and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSequence {
    pub(crate) inputs: DMatrix<f64>,
    pub(crate) targets: DMatrix<f64>,
    pub(crate) washout: usize,
    pub(crate) name: String,
}

impl SupervisedSequence {
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>, washout: usize, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if inputs.ncols() != targets.ncols() {
            return Err(Error::contract(format!(
                "{name}: inputs have {} steps, targets {}",
                inputs.ncols(),
                targets.ncols()
            )));
        }
        if washout >= inputs.ncols() {
            return Err(Error::contract(format!(
                "{name}: washout {washout} leaves no samples out of {}",
                inputs.ncols()
            )));
        }
        if !inputs.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return Err(Error::contract(format!("{name}: non-finite values")));
        }
        Ok(SupervisedSequence {
            inputs,
            targets,
            washout,
            name,
        })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.nrows()
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }

    /// Number of post-washout samples.
    pub fn n_effective(&self) -> usize {
        self.len() - self.washout
    }

    pub fn effective_targets(&self) -> DMatrix<f64> {
        self.targets.columns(self.washout, self.n_effective()).into_owned()
    }

    /// Columns `start..start+len` as a new sequence.
    pub fn slice(&self, start: usize, len: usize, washout: usize, name: impl Into<String>) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::contract(format!(
                "slice {start}..{} out of range for length {}",
                start + len,
                self.len()
            )));
        }
        SupervisedSequence::new(
            self.inputs.columns(start, len).into_owned(),
            self.targets.columns(start, len).into_owned(),
            washout,
            name,
        )
    }

    pub fn with_washout(mut self, washout: usize) -> Result<Self> {
        if washout >= self.len() {
            return Err(Error::contract(format!("washout {washout} too long for {}", self.len())));
        }
        self.washout = washout;
        Ok(self)
    }
}

/// Train, validation and test splits of one benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub train: SupervisedSequence,
    pub val: SupervisedSequence,
    pub test: SupervisedSequence,
}

impl Task {
    pub fn new(name: impl Into<String>, train: SupervisedSequence, val: SupervisedSequence, test: SupervisedSequence) -> Result<Self> {
        let dims = (train.n_inputs(), train.n_outputs());
        for s in [&val, &test] {
            if (s.n_inputs(), s.n_outputs()) != dims {
                return Err(Error::contract(format!(
                    "split {} has shape {}x{}, train has {}x{}",
                    s.name,
                    s.n_inputs(),
                    s.n_outputs(),
                    dims.0,
                    dims.1
                )));
            }
        }
        Ok(Task {
            name: name.into(),
            train,
            val,
            test,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.train.n_inputs()
    }

    pub fn n_outputs(&self) -> usize {
        self.train.n_outputs()
    }

    pub fn split(&self, which: Split) -> &SupervisedSequence {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

/// Perturbs the targets with i.i.d. zero-mean Gaussian noise; inputs are
/// untouched.
pub fn add_gaussian_noise(seq: &SupervisedSequence, sigma: f64, rng: &mut impl Rng) -> Result<SupervisedSequence> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::contract(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    let mut out = seq.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::contract(e.to_string()))?;
    for v in out.targets.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(out)
}

/// Population standard deviation of all target values.
pub(crate) fn target_std(seq: &SupervisedSequence) -> f64 {
    let n = seq.targets.len() as f64;
    let mean = seq.targets.iter().sum::<f64>() / n;
    (seq.targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{rng_for, Stream};

    fn seq(n: usize) -> SupervisedSequence {
        SupervisedSequence::new(
            DMatrix::from_fn(2, n, |i, j| (i + j) as f64),
            DMatrix::from_fn(1, n, |_, j| (j as f64 * 0.1).sin()),
            0,
            "s",
        )
        .unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(SupervisedSequence::new(DMatrix::zeros(1, 3), DMatrix::zeros(1, 4), 0, "x").is_err());
        assert!(SupervisedSequence::new(DMatrix::zeros(1, 3), DMatrix::zeros(1, 3), 3, "x").is_err());
        assert!(SupervisedSequence::new(DMatrix::from_element(1, 3, f64::INFINITY), DMatrix::zeros(1, 3), 0, "x").is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = seq(50);
        let out = add_gaussian_noise(&s, 0.0, &mut rng_for(1, Stream::Noise)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn noise_is_seeded() {
        let s = seq(50);
        let a = add_gaussian_noise(&s, 0.3, &mut rng_for(9, Stream::Noise)).unwrap();
        let b = add_gaussian_noise(&s, 0.3, &mut rng_for(9, Stream::Noise)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.inputs(), s.inputs());
        assert_ne!(a.targets(), s.targets());
    }

    #[test]
    fn noise_sample_std_close_to_sigma() {
        let s = seq(10_000);
        let sigma = 0.25;
        let noisy = add_gaussian_noise(&s, sigma, &mut rng_for(3, Stream::Noise)).unwrap();
        let diff: Vec<f64> = noisy.targets().iter().zip(s.targets().iter()).map(|(a, b)| a - b).collect();
        let mean = diff.iter().sum::<f64>() / diff.len() as f64;
        let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diff.len() - 1) as f64).sqrt();
        assert!((sd - sigma).abs() <= 0.05 * sigma, "sample std {sd}");
    }
}
