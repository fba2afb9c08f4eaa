//! Child-Sum Tree-LSTM over encoded ASTs.
//!
//! For node `t` with embedding `w` and children `k` carrying `(h_k, c_k)`:
//!
//! ```text
//! f_tk = σ(W_f·w + U_f·h_k + b_f)          one forget gate per child
//! h̃    = Σ_k h_k
//! i    = σ(W_i·w + U_i·h̃ + b_i)
//! c̃    = tanh(W_c·w + U_c·h̃ + b_c)
//! c    = i ⊙ c̃ + Σ_k f_tk ⊙ c_k
//! o    = σ(W_o·w + U_o·h̃ + b_o)
//! h    = o ⊙ tanh(c)
//! ```
//!
//! Leaves see `h̃ = 0` and no forget terms. Trees are evaluated over their
//! post-order arena, so depth is bounded by memory rather than by the call
//! stack.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{encode, EncodedTree, FileRecord, Vocabulary};
use crate::embedding::{init_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};
use crate::rng::{derive_seed, StreamRng};

pub const DEFAULT_DEPTH_LIMIT: usize = 10_000;

/// Parameters of one gate: `W` (hidden × d), `U` (hidden × hidden), `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(hidden_dim: usize, d: usize) -> Self {
        GateParams {
            w: Matrix::zeros(hidden_dim, d),
            u: Matrix::zeros(hidden_dim, hidden_dim),
            b: vec![0.0; hidden_dim],
        }
    }

    /// Glorot-uniform `W` and `U`, zero bias.
    pub fn glorot<R: Rng>(hidden_dim: usize, d: usize, rng: &mut R) -> Self {
        let bw = (6.0 / (hidden_dim + d) as f64).sqrt();
        let bu = (6.0 / (2 * hidden_dim) as f64).sqrt();
        GateParams {
            w: Matrix::uniform(hidden_dim, d, bw, rng),
            u: Matrix::uniform(hidden_dim, hidden_dim, bu, rng),
            b: vec![0.0; hidden_dim],
        }
    }

    fn check(&self, name: &str, hidden_dim: usize, d: usize) -> Result<()> {
        let shapes_ok = self.w.rows() == hidden_dim
            && self.w.cols() == d
            && self.u.rows() == hidden_dim
            && self.u.cols() == hidden_dim
            && self.b.len() == hidden_dim;
        if !shapes_ok {
            return Err(Error::schema(
                name,
                format!("gate shapes do not match hidden_dim={hidden_dim}, d={d}"),
            ));
        }
        if !self.w.is_finite() || !self.u.is_finite() || self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema(name, "non-finite gate parameter"));
        }
        Ok(())
    }

    /// out = W·x + U·h + b
    fn preactivation(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        self.w.mul_vec_acc(x, out);
        self.u.mul_vec_acc(h, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeLstmModel {
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix,
    pub forget: GateParams,
    pub input: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
    hidden_dim: usize,
    depth_limit: usize,
}

impl TreeLstmModel {
    pub fn new(
        vocab: Vocabulary,
        embeddings: EmbeddingMatrix,
        [forget, input, cell, output]: [GateParams; 4],
    ) -> Result<Self> {
        let hidden_dim = forget.b.len();
        let d = embeddings.dim();
        if hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if embeddings.vocab_size() != vocab.len() {
            return Err(Error::schema(
                "embeddings",
                format!("{} columns for {} vocabulary entries", embeddings.vocab_size(), vocab.len()),
            ));
        }
        for (name, g) in [("forget", &forget), ("input", &input), ("cell", &cell), ("output", &output)] {
            g.check(name, hidden_dim, d)?;
        }
        Ok(TreeLstmModel {
            vocab,
            embeddings,
            forget,
            input,
            cell,
            output,
            hidden_dim,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        })
    }

    /// Random initialization: embeddings from the `embeddings` stream of
    /// `seed`, gate matrices from its `gates` stream.
    pub fn init(vocab: Vocabulary, d: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        let embeddings = init_embeddings(d, vocab.len(), derive_seed(seed, "embeddings"))?;
        let mut rng = StreamRng::seed_from_u64(derive_seed(seed, "gates"));
        let gates = [(); 4].map(|_| GateParams::glorot(hidden_dim, d, &mut rng));
        TreeLstmModel::new(vocab, embeddings, gates)
    }

    pub fn zeros(vocab: Vocabulary, d: usize, hidden_dim: usize) -> Result<Self> {
        let embeddings = EmbeddingMatrix::zeros(d, vocab.len());
        TreeLstmModel::new(vocab, embeddings, [(); 4].map(|_| GateParams::zeros(hidden_dim, d)))
    }

    pub fn with_depth_limit(mut self, limit: usize) -> Self {
        self.depth_limit = limit;
        self
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn embeddings_mut(&mut self) -> &mut EmbeddingMatrix {
        &mut self.embeddings
    }

    pub fn embedding_dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn gates(&self) -> [&GateParams; 4] {
        [&self.forget, &self.input, &self.cell, &self.output]
    }

    /// Every parameter tensor, flattened, in a fixed order: embeddings, then
    /// `W`, `U`, `b` for the forget, input, cell and output gates.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embeddings.values().as_slice()];
        for g in self.gates() {
            out.extend([g.w.as_slice(), g.u.as_slice(), g.b.as_slice()]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embeddings.values_mut().as_mut_slice()];
        for g in [&mut self.forget, &mut self.input, &mut self.cell, &mut self.output] {
            out.push(g.w.as_mut_slice());
            out.push(g.u.as_mut_slice());
            out.push(g.b.as_mut_slice());
        }
        out
    }

    pub fn encode(&self, record: &FileRecord) -> EncodedTree {
        encode(&record.tree, &self.vocab)
    }
}

pub const TENSOR_NAMES: [&str; 13] = [
    "embeddings", "forget.w", "forget.u", "forget.b", "input.w", "input.u", "input.b", "cell.w",
    "cell.u", "cell.b", "output.w", "output.u", "output.b",
];

/// Hidden output and memory cell of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Intermediate values of one node, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct NodeTrace {
    /// Embedding as fed to the gates (after any dropout scaling).
    pub w: Vec<f64>,
    pub h_sum: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    /// One row of `hidden_dim` values per child, in child order.
    pub forget: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub nodes: Vec<NodeTrace>,
}

impl ForwardTrace {
    pub fn root(&self) -> &NodeTrace {
        self.nodes.last().expect("trees are non-empty")
    }
}

fn check_depth(tree: &EncodedTree, model: &TreeLstmModel, file: &str) -> Result<()> {
    if tree.depth() > model.depth_limit {
        return Err(Error::DepthExceeded {
            file: file.to_string(),
            depth: tree.depth(),
            limit: model.depth_limit,
        });
    }
    Ok(())
}

/// Evaluates every node. `input_scale`, when given, holds `d` multipliers per
/// node (post-order) applied to the embeddings; pretraining uses it for
/// dropout.
pub fn forward_trace(
    tree: &EncodedTree,
    model: &TreeLstmModel,
    input_scale: Option<&[f64]>,
) -> Result<ForwardTrace> {
    check_depth(tree, model, "<tree>")?;
    let d = model.embedding_dim();
    let hd = model.hidden_dim;
    if let Some(s) = input_scale {
        if s.len() != tree.len() * d {
            return Err(Error::Contract("input scale must hold d values per node".into()));
        }
    }
    let vocab_size = model.vocab.len();
    let mut nodes: Vec<NodeTrace> = Vec::with_capacity(tree.len());
    let mut pre = vec![0.0; hd];
    for t in 0..tree.len() {
        let label = tree.label(t);
        if label >= vocab_size {
            return Err(Error::Contract(format!(
                "label index {label} outside vocabulary of {vocab_size}"
            )));
        }
        let mut w = vec![0.0; d];
        model.embeddings.column_into(label, &mut w);
        if let Some(s) = input_scale {
            for (wi, si) in w.iter_mut().zip(&s[t * d..(t + 1) * d]) {
                *wi *= si;
            }
        }

        let kids = tree.children(t);
        let mut h_sum = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut forget = Vec::with_capacity(kids.len() * hd);
        for &k in kids {
            let child = &nodes[k];
            model.forget.preactivation(&w, &child.h, &mut pre);
            for j in 0..hd {
                let f = sigmoid(pre[j]);
                forget.push(f);
                c[j] += f * child.c[j];
                h_sum[j] += child.h[j];
            }
        }

        let mut input = vec![0.0; hd];
        model.input.preactivation(&w, &h_sum, &mut input);
        input.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut candidate = vec![0.0; hd];
        model.cell.preactivation(&w, &h_sum, &mut candidate);
        candidate.iter_mut().for_each(|v| *v = v.tanh());
        let mut output = vec![0.0; hd];
        model.output.preactivation(&w, &h_sum, &mut output);
        output.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut h = vec![0.0; hd];
        for j in 0..hd {
            c[j] += input[j] * candidate[j];
            h[j] = output[j] * c[j].tanh();
        }
        if c.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::Internal(format!("non-finite state at node {t}")));
        }
        nodes.push(NodeTrace {
            w,
            h_sum,
            input,
            candidate,
            output,
            forget,
            c,
            h,
        });
    }
    Ok(ForwardTrace { nodes })
}

/// `(h, c)` of every node, in post-order.
pub fn node_states(tree: &EncodedTree, model: &TreeLstmModel) -> Result<Vec<NodeState>> {
    Ok(forward_trace(tree, model, None)?
        .nodes
        .into_iter()
        .map(|n| NodeState { h: n.h, c: n.c })
        .collect())
}

/// `(h, c)` of the root.
pub fn t_lstm(tree: &EncodedTree, model: &TreeLstmModel) -> Result<NodeState> {
    let mut states = node_states(tree, model)?;
    Ok(states.pop().expect("trees are non-empty"))
}

/// The file's feature vector: the root hidden state.
pub fn forward_root(record: &FileRecord, model: &TreeLstmModel) -> Result<Vec<f64>> {
    let tree = model.encode(record);
    check_depth(&tree, model, &record.key())?;
    Ok(t_lstm(&tree, model)?.h)
}
