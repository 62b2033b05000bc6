//! Nonlinear plant identification benchmark.
//!
//! `y(n+1) = 0.72 y(n) + 0.025 y(n-1) u(n) + 0.01 u(n-2)² + 0.2 u(n-3)`, with
//! `y(1) = y(2) = y(3) = 0`, `y(4) = 0.1` and `u(n) = 0` for `n <= 0`. The
//! model sees `[y(n), u(n)]` and predicts `y(n+1)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SupervisedSequence, Task};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub coefficients: [f64; 4],
    pub initial_outputs: [f64; 4],
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub washout: usize,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            coefficients: [0.72, 0.025, 0.01, 0.2],
            initial_outputs: [0.0, 0.0, 0.0, 0.1],
            n_train: 2000,
            n_val: 1000,
            n_test: 1000,
            washout: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantPhase {
    /// Uniform random input on [-1, 1], long enough for train + validation.
    Train,
    /// The deterministic piecewise test signal.
    Test,
}

/// Piecewise test input, defined for `1 <= n <= 1000`.
pub fn test_input(n: usize) -> f64 {
    let t = n as f64;
    if n < 250 {
        (PI * t / 25.0).sin()
    } else if n < 500 {
        1.0
    } else if n < 750 {
        -1.0
    } else {
        0.6 * (PI * t / 10.0).cos() + 0.1 * (PI * t / 32.0).cos() + 0.3 * (PI * t / 25.0).sin()
    }
}

/// Runs the plant for the given input sequence `u(1..=len)` and returns
/// `y(1..=len+1)`.
pub(crate) fn simulate(p: &PlantParams, u: &[f64]) -> Vec<f64> {
    let len = u.len();
    let [c0, c1, c2, c3] = p.coefficients;
    let u_at = |n: isize| if n >= 1 { u[(n - 1) as usize] } else { 0.0 };
    let mut y = vec![0.0; (len + 1).max(4)];
    y[..4].copy_from_slice(&p.initial_outputs);
    for n in 4..=len {
        let ni = n as isize;
        y[n] = c0 * y[n - 1] + c1 * y[n - 2] * u_at(ni) + c2 * u_at(ni - 2).powi(2) + c3 * u_at(ni - 3);
    }
    y.truncate(len + 1);
    y
}

/// Simulates one phase and returns the full supervised sequence (washout 0).
pub fn plant_simulate(p: &PlantParams, phase: PlantPhase, rng: &mut impl Rng) -> Result<SupervisedSequence> {
    let u: Vec<f64> = match phase {
        PlantPhase::Train => (0..p.n_train + p.n_val).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
        PlantPhase::Test => (1..=p.n_test).map(test_input).collect(),
    };
    let y = simulate(p, &u);
    let len = u.len();
    let inputs = DMatrix::from_fn(2, len, |i, j| if i == 0 { y[j] } else { u[j] });
    let targets = DMatrix::from_fn(1, len, |_, j| y[j + 1]);
    let label = match phase {
        PlantPhase::Train => "plant-train-phase",
        PlantPhase::Test => "plant-test-phase",
    };
    SupervisedSequence::new(inputs, targets, 0, label)
}

/// Train and validation come from one random-input run (first `n_train`
/// samples, then the next `n_val`); test is a separate run under the
/// piecewise input.
pub fn plant_task(p: &PlantParams, rng: &mut impl Rng) -> Result<Task> {
    let train_phase = plant_simulate(p, PlantPhase::Train, rng)?;
    let test_phase = plant_simulate(p, PlantPhase::Test, rng)?;
    Task::new(
        "plant",
        train_phase.slice(0, p.n_train, p.washout, "plant-train")?,
        train_phase.slice(p.n_train, p.n_val, p.washout, "plant-val")?,
        test_phase.with_washout(p.washout)?.renamed("plant-test"),
    )
}

impl SupervisedSequence {
    pub(crate) fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{rng_for, Stream};
    use approx::assert_relative_eq;

    #[test]
    fn zero_input_decay() {
        let y = simulate(&PlantParams::default(), &[0.0; 6]);
        assert_eq!(&y[..4], &[0.0, 0.0, 0.0, 0.1]);
        assert_relative_eq!(y[4], 0.072, epsilon = 1e-15);
        assert_relative_eq!(y[5], 0.72 * 0.072, epsilon = 1e-15);
    }

    #[test]
    fn recursion_hand_unrolled() {
        let u = [0.5, -0.25, 0.75, 1.0, -0.5];
        let y = simulate(&PlantParams::default(), &u);
        // y(5) uses u(4), u(2), u(1); y(6) uses u(5), u(3), u(2)
        let y5 = 0.72 * 0.1 + 0.025 * 0.0 * 1.0 + 0.01 * (-0.25f64).powi(2) + 0.2 * 0.5;
        let y6 = 0.72 * y5 + 0.025 * 0.1 * -0.5 + 0.01 * 0.75f64.powi(2) + 0.2 * -0.25;
        assert_relative_eq!(y[4], y5, epsilon = 1e-15);
        assert_relative_eq!(y[5], y6, epsilon = 1e-15);
    }

    #[test]
    fn test_input_segments() {
        assert_eq!(test_input(300), 1.0);
        assert!(test_input(100).abs() < 1e-12);
        assert_eq!(test_input(600), -1.0);
        let n = 800.0f64;
        let expected = 0.6 * (PI * n / 10.0).cos() + 0.1 * (PI * n / 32.0).cos() + 0.3 * (PI * n / 25.0).sin();
        assert_eq!(test_input(800), expected);
    }

    #[test]
    fn task_layout() {
        let task = plant_task(&PlantParams::default(), &mut rng_for(2, Stream::Task)).unwrap();
        assert_eq!((task.train.len(), task.val.len(), task.test.len()), (2000, 1000, 1000));
        assert_eq!(task.n_inputs(), 2);
        assert_eq!(task.train.washout(), 100);
        // input y(n) of the next sample equals the target of the current one
        for s in [&task.train, &task.val, &task.test] {
            for j in 0..s.len() - 1 {
                assert_eq!(s.inputs()[(0, j + 1)], s.targets()[(0, j)]);
            }
        }
        assert_eq!(task.val.inputs()[(0, 0)], task.train.targets()[(0, 1999)]);
        assert_eq!(task.test.inputs()[(1, 299)], 1.0);
    }

    #[test]
    fn phases_share_recursion() {
        let p = PlantParams::default();
        let seq = plant_simulate(&p, PlantPhase::Train, &mut rng_for(4, Stream::Task)).unwrap();
        let u: Vec<f64> = seq.inputs().row(1).iter().copied().collect();
        let y = simulate(&p, &u);
        assert_eq!(seq.targets().row(0).iter().copied().collect::<Vec<_>>(), y[1..].to_vec());
    }
}
