//! Random candidate nodes: drawing, state evaluation and scoring.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reservoir::{Activation, StateSequence};
use crate::seeds::symmetric;

/// One randomly drawn node for position `N` (0-based) in a reservoir of `N`
/// existing nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateNode {
    pub input_row: DVector<f64>,
    /// Weights on the `N` existing nodes followed by the self weight.
    pub feedback_row: DVector<f64>,
    pub bias: f64,
    /// Node state over the whole training sequence, washout included.
    pub state_seq: DVector<f64>,
    /// Sum of `per_output_scores`; `-inf` for an all-zero state.
    pub score: f64,
    pub per_output_scores: DVector<f64>,
}

impl CandidateNode {
    pub fn self_weight(&self) -> f64 {
        self.feedback_row[self.feedback_row.len() - 1]
    }

    pub fn min_output_score(&self) -> f64 {
        self.per_output_scores.min()
    }
}

/// Weights of a candidate before its states are computed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Draw {
    pub input_row: DVector<f64>,
    pub feedback_row: DVector<f64>,
    pub bias: f64,
}

/// Draws `count` candidates with every weight uniform on `[-lambda, lambda]`.
/// With `self_clamp = Some(a)` the self weight is clipped to `[-a, a]`.
pub(crate) fn draw_candidates(
    rng: &mut impl Rng,
    n_inputs: usize,
    n_nodes: usize,
    count: usize,
    lambda: f64,
    self_clamp: Option<f64>,
) -> Vec<Draw> {
    (0..count)
        .map(|_| {
            let input_row = DVector::from_fn(n_inputs, |_, _| symmetric(rng, lambda));
            let mut feedback_row = DVector::from_fn(n_nodes + 1, |_, _| symmetric(rng, lambda));
            if let Some(a) = self_clamp {
                feedback_row[n_nodes] = feedback_row[n_nodes].clamp(-a, a);
            }
            let bias = symmetric(rng, lambda);
            Draw {
                input_row,
                feedback_row,
                bias,
            }
        })
        .collect()
}

/// State sequence of a new node appended below the existing ones:
/// `g(n) = act(w_in·u(n) + Σ_j w_r[j] x_j(n-1) + w_self g(n-1) + b)`, `g(0) = 0`.
///
/// Old node states are read from `seq` unchanged, which is valid because the
/// appended row leaves every earlier row of the feedback matrix untouched.
pub fn candidate_states(
    seq: &StateSequence,
    input_row: &DVector<f64>,
    feedback_row: &DVector<f64>,
    bias: f64,
    activation: Activation,
) -> Result<DVector<f64>> {
    let n = seq.n_nodes();
    let k = seq.extended().nrows() - n;
    if input_row.len() != k || feedback_row.len() != n + 1 {
        return Err(Error::contract(format!(
            "candidate has {} input and {} feedback weights, expected {k} and {}",
            input_row.len(),
            feedback_row.len(),
            n + 1
        )));
    }
    let ext = seq.extended();
    let w_self = feedback_row[n];
    let mut out = DVector::zeros(seq.len());
    let mut prev = 0.0;
    for t in 0..seq.len() {
        let mut acc = bias + input_row.dot(&ext.view((n, t), (k, 1)));
        if n > 0 {
            acc += if t == 0 {
                feedback_row.rows(0, n).dot(seq.initial_state())
            } else {
                feedback_row.rows(0, n).dot(&ext.view((0, t - 1), (n, 1)))
            };
        }
        acc += w_self * prev;
        prev = activation.apply(acc);
        out[t] = prev;
    }
    Ok(out)
}

/// [`candidate_states`] for a whole pool. The drive from inputs and old
/// states is one matrix product; the self-recurrence then runs per candidate
/// in parallel. Results are in draw order.
pub(crate) fn pool_states(seq: &StateSequence, draws: &[Draw], activation: Activation) -> Vec<DVector<f64>> {
    let n = seq.n_nodes();
    let t_len = seq.len();
    let k = seq.extended().nrows() - n;
    let g = draws.len();
    if g == 0 {
        return Vec::new();
    }

    // Zᵀ: row t = [u(t)ᵀ, x(t-1)ᵀ]
    let ext = seq.extended();
    let mut z_t = DMatrix::zeros(t_len, k + n);
    for t in 0..t_len {
        for i in 0..k {
            z_t[(t, i)] = ext[(n + i, t)];
        }
        for j in 0..n {
            z_t[(t, k + j)] = if t == 0 { seq.initial_state()[j] } else { ext[(j, t - 1)] };
        }
    }
    let mut a_t = DMatrix::zeros(k + n, g);
    for (c, d) in draws.iter().enumerate() {
        a_t.view_mut((0, c), (k, 1)).copy_from(&d.input_row);
        a_t.view_mut((k, c), (n, 1)).copy_from(&d.feedback_row.rows(0, n));
    }
    let drive = z_t * a_t;

    (0..g)
        .into_par_iter()
        .map(|c| {
            let d = &draws[c];
            let w_self = d.feedback_row[n];
            let col = drive.column(c);
            let mut out = DVector::zeros(t_len);
            let mut prev = 0.0;
            for t in 0..t_len {
                prev = activation.apply(col[t] + d.bias + w_self * prev);
                out[t] = prev;
            }
            out
        })
        .collect()
}

/// `ξ_q = ⟨e_q, g⟩² / ⟨g, g⟩ − (1 − r − μ) ‖e_q‖²` for every output row of the
/// residual, and their sum. An all-zero `g` scores `-inf`.
pub fn score_candidate(residual: &DMatrix<f64>, g: DVectorView<'_, f64>, r: f64, mu: f64) -> (f64, DVector<f64>) {
    let gg = g.dot(&g);
    let l = residual.nrows();
    if gg == 0.0 {
        return (f64::NEG_INFINITY, DVector::from_element(l, f64::NEG_INFINITY));
    }
    let penalty = 1.0 - r - mu;
    let per = DVector::from_fn(l, |q, _| {
        let e = residual.row(q);
        let eg: f64 = e.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let ee: f64 = e.iter().map(|v| v * v).sum();
        eg * eg / gg - penalty * ee
    });
    (per.sum(), per)
}
