//! Model building blocks: LSTM encoders, feature attention, output heads and
//! losses.
//!
//! Every block has a graph builder used during training and inference, and a
//! value-level function that runs the same builder over constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Output layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Three-way distribution over breakdown labels.
    Softmax3,
    /// Probability of the positive (satisfied) class.
    Sigmoid1,
}

impl Head {
    /// Width of the output layer.
    pub fn outputs(self) -> usize {
        match self {
            Head::Softmax3 => 3,
            Head::Sigmoid1 => 1,
        }
    }

    /// Number of gold classes in the label space.
    pub fn classes(self) -> usize {
        match self {
            Head::Softmax3 => 3,
            Head::Sigmoid1 => 2,
        }
    }
}

fn uniform(shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor { shape, data }
}

/// Weights of one LSTM direction. Gate rows are stacked as input, forget,
/// candidate, output; a single bias covers all four.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[4H, input_dim]`
    pub w_ih: Tensor,
    /// `[4H, H]`
    pub w_hh: Tensor,
    /// `[4H]`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_ih: Tensor::zeros(vec![4 * hidden_dim, input_dim]),
            w_hh: Tensor::zeros(vec![4 * hidden_dim, hidden_dim]),
            bias: Tensor::zeros(vec![4 * hidden_dim]),
        }
    }

    /// Weights from `uniform(±1/√fan_in)`, zero biases except the forget
    /// gate, which starts at 1.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let h = hidden_dim;
        let w_ih = uniform(vec![4 * h, input_dim], 1.0 / (input_dim.max(1) as f64).sqrt(), rng);
        let w_hh = uniform(vec![4 * h, h], 1.0 / (h as f64).sqrt(), rng);
        let mut bias = Tensor::zeros(vec![4 * h]);
        bias.data[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        Self {
            input_dim,
            hidden_dim,
            w_ih,
            w_hh,
            bias,
        }
    }

    pub fn check(&self) -> Result<()> {
        let h = self.hidden_dim;
        if h == 0 || self.input_dim == 0 {
            return Err(Error::Dimension("LSTM dimensions must be positive".into()));
        }
        if self.w_ih.shape != [4 * h, self.input_dim] || self.w_hh.shape != [4 * h, h] || self.bias.shape != [4 * h] {
            return Err(Error::Dimension(format!(
                "LSTM tensors {:?}/{:?}/{:?} do not match input {} and hidden {h}",
                self.w_ih.shape, self.w_hh.shape, self.bias.shape, self.input_dim
            )));
        }
        Ok(())
    }

    /// Store the tensors as `{prefix}.w_ih`, `{prefix}.w_hh`, `{prefix}.bias`.
    pub fn register(self, store: &mut ParamStore, prefix: &str) -> Result<()> {
        self.check()?;
        store.insert(format!("{prefix}.w_ih"), self.w_ih)?;
        store.insert(format!("{prefix}.w_hh"), self.w_hh)?;
        store.insert(format!("{prefix}.bias"), self.bias)?;
        Ok(())
    }
}

/// Graph handles of one LSTM direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub w_ih: NodeId,
    pub w_hh: NodeId,
    pub bias: NodeId,
}

impl LstmNodes {
    pub fn from_store(g: &mut Graph, prefix: &str) -> Result<Self> {
        Ok(Self {
            w_ih: g.param(&format!("{prefix}.w_ih"))?,
            w_hh: g.param(&format!("{prefix}.w_hh"))?,
            bias: g.param(&format!("{prefix}.bias"))?,
        })
    }

    pub fn constants(g: &mut Graph, p: &LstmParams) -> Result<Self> {
        p.check()?;
        Ok(Self {
            w_ih: g.constant(p.w_ih.clone()),
            w_hh: g.constant(p.w_hh.clone()),
            bias: g.constant(p.bias.clone()),
        })
    }

    pub fn hidden(&self, g: &Graph) -> usize {
        g.shape(self.w_hh)[1]
    }

    /// One step; `state` and the result are `[h; c]` nodes.
    pub fn step(&self, g: &mut Graph, x: NodeId, state: Option<NodeId>) -> Result<NodeId> {
        g.lstm_step(x, state, self.w_ih, self.w_hh, self.bias)
    }

    /// Run over `xs` (reversed when `reverse`) and return the final `[h; c]`.
    pub fn run(&self, g: &mut Graph, xs: &[NodeId], reverse: bool) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("LSTM input sequence is empty".into()));
        }
        let mut state = None;
        let order: Box<dyn Iterator<Item = &NodeId>> = if reverse {
            Box::new(xs.iter().rev())
        } else {
            Box::new(xs.iter())
        };
        for x in order {
            state = Some(self.step(g, *x, state)?);
        }
        Ok(state.expect("non-empty sequence"))
    }
}

/// Concatenated last hidden states of a forward pass and a reversed pass.
pub fn bilstm_last_graph(g: &mut Graph, fwd: &LstmNodes, bwd: &LstmNodes, xs: &[NodeId]) -> Result<NodeId> {
    let hf = fwd.hidden(g);
    let hb = bwd.hidden(g);
    let sf = fwd.run(g, xs, false)?;
    let sb = bwd.run(g, xs, true)?;
    let h_fwd = g.slice(sf, 0, hf)?;
    let h_bwd = g.slice(sb, 0, hb)?;
    Ok(g.concat(&[h_fwd, h_bwd]))
}

/// One LSTM step on plain vectors.
pub fn lstm_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let hd = p.hidden_dim;
    if h.len() != hd || c.len() != hd {
        return Err(Error::Dimension(format!(
            "LSTM state lengths {}/{} do not match hidden {hd}",
            h.len(),
            c.len()
        )));
    }
    let mut g = Graph::detached();
    let nodes = LstmNodes::constants(&mut g, p)?;
    let xn = g.vector(x.to_vec());
    let state = g.vector(h.iter().chain(c).copied().collect());
    let out = nodes.step(&mut g, xn, Some(state))?;
    let v = g.value(out);
    Ok((v[..hd].to_vec(), v[hd..].to_vec()))
}

/// Bidirectional encoding of a sequence of vectors; output length is
/// `fwd.hidden_dim + bwd.hidden_dim`.
pub fn bilstm_last(seq: &[Vec<f64>], fwd: &LstmParams, bwd: &LstmParams) -> Result<Vec<f64>> {
    let mut g = Graph::detached();
    let f = LstmNodes::constants(&mut g, fwd)?;
    let b = LstmNodes::constants(&mut g, bwd)?;
    let xs: Vec<NodeId> = seq.iter().map(|x| g.vector(x.clone())).collect();
    let out = bilstm_last_graph(&mut g, &f, &b, &xs)?;
    Ok(g.value(out).to_vec())
}

/// Attention over the rows of a behavioral feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `[d, d]`
    pub m: Tensor,
    /// `[d]`
    pub c: Tensor,
    /// `[d]`, shared by every row.
    pub b: Tensor,
}

impl AttentionParams {
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (dim.max(1) as f64).sqrt();
        Self {
            m: uniform(vec![dim, dim], k, rng),
            c: uniform(vec![dim], k, rng),
            b: uniform(vec![dim], k, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dim();
        if self.m.shape != [d, d] || self.b.shape != [d] || self.c.shape != [d] {
            return Err(Error::Dimension(format!(
                "attention tensors {:?}/{:?}/{:?} are inconsistent",
                self.m.shape, self.c.shape, self.b.shape
            )));
        }
        Ok(())
    }

    /// Store the tensors as `{prefix}.m`, `{prefix}.c`, `{prefix}.b`.
    pub fn register(self, store: &mut ParamStore, prefix: &str) -> Result<()> {
        self.check()?;
        store.insert(format!("{prefix}.m"), self.m)?;
        store.insert(format!("{prefix}.c"), self.c)?;
        store.insert(format!("{prefix}.b"), self.b)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionNodes {
    pub m: NodeId,
    pub c: NodeId,
    pub b: NodeId,
}

impl AttentionNodes {
    pub fn from_store(g: &mut Graph, prefix: &str) -> Result<Self> {
        Ok(Self {
            m: g.param(&format!("{prefix}.m"))?,
            c: g.param(&format!("{prefix}.c"))?,
            b: g.param(&format!("{prefix}.b"))?,
        })
    }

    pub fn constants(g: &mut Graph, p: &AttentionParams) -> Result<Self> {
        p.check()?;
        Ok(Self {
            m: g.constant(p.m.clone()),
            c: g.constant(p.c.clone()),
            b: g.constant(p.b.clone()),
        })
    }

    /// `s_k = tanh(Mᵀ v_k + b)`, `α = softmax(s_k · c)`, output `Σ α_k v_k`.
    /// Returns the pooled vector and the weight node.
    pub fn apply(&self, g: &mut Graph, rows: &[NodeId]) -> Result<(NodeId, NodeId)> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("attention needs at least one row".into()));
        }
        let mut scores = Vec::with_capacity(rows.len());
        for v in rows {
            let proj = g.matvec_t(self.m, *v)?;
            let pre = g.add(proj, self.b)?;
            let s = g.tanh(pre);
            scores.push(g.dot(s, self.c)?);
        }
        let score_vec = g.concat(&scores);
        let alpha = g.softmax(score_vec);
        let pooled = g.weighted_sum(alpha, rows)?;
        Ok((pooled, alpha))
    }
}

/// Value-level attention; returns the pooled vector and the weights.
pub fn feature_attention(rows: &[Vec<f64>], p: &AttentionParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g = Graph::detached();
    let nodes = AttentionNodes::constants(&mut g, p)?;
    let xs: Vec<NodeId> = rows.iter().map(|r| g.vector(r.clone())).collect();
    let (out, alpha) = nodes.apply(&mut g, &xs)?;
    Ok((g.value(out).to_vec(), g.value(alpha).to_vec()))
}

/// Dense output layer followed by the head activation.
pub fn output_head_graph(g: &mut Graph, w: NodeId, b: NodeId, x: NodeId, head: Head) -> Result<NodeId> {
    if g.shape(w).first() != Some(&head.outputs()) {
        return Err(Error::Dimension(format!(
            "output weights {:?} do not match a {head:?} head",
            g.shape(w)
        )));
    }
    let logits = g.linear(w, x, Some(b))?;
    Ok(match head {
        Head::Softmax3 => g.softmax(logits),
        Head::Sigmoid1 => g.sigmoid(logits),
    })
}

/// Value-level output head. `w` is `[outputs, in]`, `b` is `[outputs]`.
pub fn output_head(x: &[f64], head: Head, w: &Tensor, b: &Tensor) -> Result<Vec<f64>> {
    let mut g = Graph::detached();
    let wn = g.constant(w.clone());
    let bn = g.constant(b.clone());
    let xn = g.vector(x.to_vec());
    let out = output_head_graph(&mut g, wn, bn, xn, head)?;
    Ok(g.value(out).to_vec())
}

/// Cross-entropy of a head output against a gold class index. For the
/// sigmoid head class 1 is the positive class.
pub fn loss_graph(g: &mut Graph, pred: NodeId, gold: usize, head: Head) -> Result<NodeId> {
    if gold >= head.classes() {
        return Err(Error::InvalidArgument(format!("gold class {gold} outside a {head:?} label space")));
    }
    match head {
        Head::Softmax3 => g.nll(pred, gold),
        Head::Sigmoid1 => g.bce(pred, gold == 1),
    }
}

pub fn loss(pred: &[f64], gold: usize, head: Head) -> Result<f64> {
    if pred.len() != head.outputs() {
        return Err(Error::Dimension(format!("{} outputs for a {head:?} head", pred.len())));
    }
    let mut g = Graph::detached();
    let p = g.vector(pred.to_vec());
    let l = loss_graph(&mut g, p, gold, head)?;
    Ok(g.scalar(l))
}
