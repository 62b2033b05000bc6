//! Reservoir network model and its state recursion.
//!
//! States evolve as `x(n) = act(W_in u(n) + W_r x(n-1) + b)` and the output is
//! the linear readout `y(n) = W_out [x(n); u(n)]`, so the readout sees both the
//! reservoir state and a direct link from the input.

use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Shape of the feedback matrix.
///
/// `BlockLowerTriangular` means a dense-ish initial block of size
/// `initial_block_size` followed by rows that only reference earlier nodes and
/// themselves. Every row `i` has zeros in columns `j > max(i, initial_block_size - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    #[default]
    BlockLowerTriangular,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDocument", try_from = "ModelDocument")]
pub struct ReservoirModel {
    pub(crate) input_weights: DMatrix<f64>,
    pub(crate) feedback: DMatrix<f64>,
    pub(crate) biases: DVector<f64>,
    pub(crate) readout: DMatrix<f64>,
    pub(crate) activation: Activation,
    pub(crate) structure: Structure,
    pub(crate) initial_block_size: usize,
}

impl ReservoirModel {
    /// Assembles a model from its parts, checking dimensions, finiteness and
    /// the triangular growth shape when `structure` asks for it.
    pub fn new(
        input_weights: DMatrix<f64>,
        feedback: DMatrix<f64>,
        biases: DVector<f64>,
        readout: DMatrix<f64>,
        activation: Activation,
        structure: Structure,
        initial_block_size: usize,
    ) -> Result<Self> {
        let model = ReservoirModel {
            input_weights,
            feedback,
            biases,
            readout,
            activation,
            structure,
            initial_block_size,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.feedback.nrows();
        let k = self.input_weights.ncols();
        if self.feedback.ncols() != n {
            return Err(Error::contract(format!(
                "feedback must be square, got {}x{}",
                n,
                self.feedback.ncols()
            )));
        }
        if self.input_weights.nrows() != n || self.biases.len() != n {
            return Err(Error::contract(format!(
                "input weights {}x{} and biases {} inconsistent with {} nodes",
                self.input_weights.nrows(),
                k,
                self.biases.len(),
                n
            )));
        }
        if self.readout.ncols() != n + k {
            return Err(Error::contract(format!(
                "readout has {} columns, expected {} (nodes + inputs)",
                self.readout.ncols(),
                n + k
            )));
        }
        if self.initial_block_size > n {
            return Err(Error::contract(format!(
                "initial block size {} exceeds {} nodes",
                self.initial_block_size, n
            )));
        }
        let all_finite = self.input_weights.iter().all(|v| v.is_finite())
            && self.feedback.iter().all(|v| v.is_finite())
            && self.biases.iter().all(|v| v.is_finite())
            && self.readout.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::contract("model contains non-finite entries"));
        }
        if self.structure == Structure::BlockLowerTriangular && !self.has_triangular_growth() {
            return Err(Error::contract(
                "feedback violates the block lower-triangular growth structure",
            ));
        }
        Ok(())
    }

    /// Checks `feedback[i][j] == 0` for every `j > max(i, initial_block_size - 1)`.
    pub fn has_triangular_growth(&self) -> bool {
        let n = self.n_nodes();
        let n0 = self.initial_block_size;
        (0..n).all(|i| {
            let last = if n0 > 0 { i.max(n0 - 1) } else { i };
            (last + 1..n).all(|j| self.feedback[(i, j)] == 0.0)
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.feedback.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.readout.nrows()
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.input_weights
    }

    pub fn feedback(&self) -> &DMatrix<f64> {
        &self.feedback
    }

    pub fn biases(&self) -> &DVector<f64> {
        &self.biases
    }

    pub fn readout(&self) -> &DMatrix<f64> {
        &self.readout
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn initial_block_size(&self) -> usize {
        self.initial_block_size
    }

    pub fn set_readout(&mut self, readout: DMatrix<f64>) -> Result<()> {
        if readout.ncols() != self.n_nodes() + self.n_inputs() {
            return Err(Error::contract(format!(
                "readout has {} columns, expected {}",
                readout.ncols(),
                self.n_nodes() + self.n_inputs()
            )));
        }
        self.readout = readout;
        Ok(())
    }

    /// Replaces the feedback matrix, e.g. after spectral scaling.
    pub(crate) fn with_feedback(&self, feedback: DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.feedback = feedback;
        out
    }

    /// Keeps the first `n` nodes, dropping later rows and columns of every
    /// node-indexed parameter. The readout is cut to the surviving state
    /// columns plus the direct-link columns; callers usually re-solve it.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        let cur = self.n_nodes();
        if n > cur || n < self.initial_block_size {
            return Err(Error::contract(format!(
                "cannot truncate {cur} nodes to {n} (initial block {})",
                self.initial_block_size
            )));
        }
        let k = self.n_inputs();
        let l = self.n_outputs();
        let mut readout = DMatrix::zeros(l, n + k);
        readout.columns_mut(0, n).copy_from(&self.readout.columns(0, n));
        readout.columns_mut(n, k).copy_from(&self.readout.columns(cur, k));
        Ok(ReservoirModel {
            input_weights: self.input_weights.rows(0, n).into_owned(),
            feedback: self.feedback.view((0, 0), (n, n)).into_owned(),
            biases: self.biases.rows(0, n).into_owned(),
            readout,
            activation: self.activation,
            structure: self.structure,
            initial_block_size: self.initial_block_size,
        })
    }

    /// Runs the reservoir from the zero state and applies the readout.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let seq = run_reservoir(self, inputs, &DVector::zeros(self.n_nodes()))?;
        readout(self, &seq)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Reservoir trajectory over one input sequence.
///
/// `extended` holds `[x(n); u(n)]` per column, the design matrix the readout
/// is fitted on. The state rows are its first `n_nodes` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    pub(crate) extended: DMatrix<f64>,
    pub(crate) initial_state: DVector<f64>,
    pub(crate) n_nodes: usize,
}

impl StateSequence {
    pub fn states(&self) -> DMatrixView<'_, f64> {
        self.extended.rows(0, self.n_nodes)
    }

    pub fn extended(&self) -> &DMatrix<f64> {
        &self.extended
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.extended.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.extended.ncols() == 0
    }

    /// Inserts a new node's state row just above the input block. The new
    /// node's initial state is zero.
    pub(crate) fn append_node(&mut self, row: &DVector<f64>) {
        let n = self.n_nodes;
        let ext = std::mem::replace(&mut self.extended, DMatrix::zeros(0, 0));
        let mut ext = ext.insert_row(n, 0.0);
        ext.row_mut(n).copy_from(&row.transpose());
        self.extended = ext;
        let init = std::mem::replace(&mut self.initial_state, DVector::zeros(0));
        self.initial_state = init.push(0.0);
        self.n_nodes += 1;
    }
}

/// Evaluates the state recursion over `inputs` (K x T), starting from
/// `initial_state`.
pub fn run_reservoir(
    model: &ReservoirModel,
    inputs: &DMatrix<f64>,
    initial_state: &DVector<f64>,
) -> Result<StateSequence> {
    let n = model.n_nodes();
    let k = model.n_inputs();
    if inputs.nrows() != k {
        return Err(Error::contract(format!(
            "inputs have {} channels, model expects {k}",
            inputs.nrows()
        )));
    }
    if initial_state.len() != n {
        return Err(Error::contract(format!(
            "initial state has length {}, model has {n} nodes",
            initial_state.len()
        )));
    }
    if !inputs.iter().all(|v| v.is_finite()) || !initial_state.iter().all(|v| v.is_finite()) {
        return Err(Error::contract("inputs or initial state contain non-finite values"));
    }

    let t_len = inputs.ncols();
    let mut extended = DMatrix::zeros(n + k, t_len);
    extended.rows_mut(n, k).copy_from(inputs);

    let mut prev = initial_state.clone();
    let mut pre = DVector::zeros(n);
    for t in 0..t_len {
        pre.copy_from(&model.biases);
        pre.gemv(1.0, &model.input_weights, &inputs.column(t), 1.0);
        pre.gemv(1.0, &model.feedback, &prev, 1.0);
        for i in 0..n {
            let v = model.activation.apply(pre[i]);
            if !v.is_finite() {
                return Err(Error::NumericOverflow {
                    step: t + 1,
                    context: format!("state of node {i}"),
                });
            }
            prev[i] = v;
        }
        extended.view_mut((0, t), (n, 1)).copy_from(&prev);
    }

    Ok(StateSequence {
        extended,
        initial_state: initial_state.clone(),
        n_nodes: n,
    })
}

/// Applies the readout to every column: `y(n) = W_out [x(n); u(n)]`.
pub fn readout(model: &ReservoirModel, seq: &StateSequence) -> Result<DMatrix<f64>> {
    if seq.n_nodes() != model.n_nodes() || seq.extended.nrows() != model.readout.ncols() {
        return Err(Error::contract(format!(
            "state sequence has {} rows, readout expects {}",
            seq.extended.nrows(),
            model.readout.ncols()
        )));
    }
    Ok(&model.readout * &seq.extended)
}

/// Outcome of driving one model from two initial states with the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct EspTrace {
    /// Euclidean state gap after each step.
    pub gaps: Vec<f64>,
    /// First step (1-based) at which the gap fell below the tolerance.
    pub converged_at: Option<usize>,
}

impl EspTrace {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(0.0)
    }
}

/// Runs `model` over `inputs` from `x_a` and from `x_b` and records how fast
/// the two state trajectories merge.
pub fn two_trajectory_gap(
    model: &ReservoirModel,
    inputs: &DMatrix<f64>,
    x_a: &DVector<f64>,
    x_b: &DVector<f64>,
    tol: f64,
) -> Result<EspTrace> {
    let a = run_reservoir(model, inputs, x_a)?;
    let b = run_reservoir(model, inputs, x_b)?;
    let diff = a.states() - b.states();
    let gaps: Vec<f64> = diff.column_iter().map(|c| c.norm()).collect();
    let converged_at = gaps.iter().position(|&g| g < tol).map(|i| i + 1);
    Ok(EspTrace { gaps, converged_at })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    n_nodes: usize,
    n_inputs: usize,
    n_outputs: usize,
    activation: Activation,
    structure_tag: Structure,
    initial_block_size: usize,
    input_weights: Vec<Vec<f64>>,
    feedback: Vec<Vec<f64>>,
    biases: Vec<f64>,
    readout: Vec<Vec<f64>>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Schema(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<ReservoirModel> for ModelDocument {
    fn from(m: ReservoirModel) -> Self {
        ModelDocument {
            version: 1,
            n_nodes: m.n_nodes(),
            n_inputs: m.n_inputs(),
            n_outputs: m.n_outputs(),
            activation: m.activation,
            structure_tag: m.structure,
            initial_block_size: m.initial_block_size,
            input_weights: to_rows(&m.input_weights),
            feedback: to_rows(&m.feedback),
            biases: m.biases.iter().copied().collect(),
            readout: to_rows(&m.readout),
        }
    }
}

impl TryFrom<ModelDocument> for ReservoirModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::Schema(format!("unsupported model version {}", doc.version)));
        }
        let (n, k, l) = (doc.n_nodes, doc.n_inputs, doc.n_outputs);
        if doc.biases.len() != n {
            return Err(Error::Schema(format!("biases must have length {n}")));
        }
        ReservoirModel::new(
            from_rows(&doc.input_weights, n, k, "input_weights")?,
            from_rows(&doc.feedback, n, n, "feedback")?,
            DVector::from_vec(doc.biases),
            from_rows(&doc.readout, l, n + k, "readout")?,
            doc.activation,
            doc.structure_tag,
            doc.initial_block_size,
        )
    }
}
