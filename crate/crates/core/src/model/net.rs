//! The assembled model: dual word and character bi-LSTM encoders over the
//! expanded context, attention over behavioral features, and a turn-level
//! LSTM with a per-turn or final output head.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, OutputMode};
use super::vocab::{chars_of, expand_context, Vocab, CHAR_VOCAB_SIZE};
use crate::data::{BreakdownLabel, Conversation, SatLabel, Turn};
use crate::error::{Error, Result};
use crate::features::{FeatureAccumulator, FeatureExtractor};
use crate::nn::{
    bilstm_last_graph, dropout_mask, loss_graph, output_head_graph, AttentionNodes, AttentionParams, Graph, Head,
    LstmNodes, LstmParams, NodeId, ParamStore, Tensor,
};

pub const PARAMS_FILE: &str = "params.bin";
pub const CONFIG_FILE: &str = "config.json";
pub const VOCAB_FILE: &str = "vocab.json";

const EMBEDDING_BOUND: f64 = 0.1;

/// Model inputs for one turn: token and character ids of the expanded
/// utterance and response.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTurn {
    pub word_u: Vec<usize>,
    pub word_r: Vec<usize>,
    pub char_u: Vec<usize>,
    pub char_r: Vec<usize>,
}

/// Model inputs for a whole conversation. `features[t]` is the scaled
/// feature vector of turn `t` (empty when features are off); the attention
/// window is assembled from it at forward time.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedConversation {
    pub id: String,
    pub turns: Vec<PreparedTurn>,
    pub features: Vec<Vec<f64>>,
}

impl PreparedConversation {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// A decided label for either head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Breakdown(BreakdownLabel),
    Sat(SatLabel),
}

impl Label {
    /// Class index in the head's label space.
    pub fn index(self) -> usize {
        match self {
            Label::Breakdown(b) => b.index(),
            Label::Sat(s) => s.index(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Breakdown(b) => b.as_str(),
            Label::Sat(s) => s.as_str(),
        }
    }

    pub fn from_index(head: Head, index: usize) -> Option<Self> {
        match head {
            Head::Softmax3 => BreakdownLabel::from_index(index).map(Label::Breakdown),
            Head::Sigmoid1 => SatLabel::from_index(index).map(Label::Sat),
        }
    }
}

/// Argmax with ties resolved toward the more severe breakdown label, or
/// SAT iff the probability exceeds 0.5.
pub fn decide(distribution: &[f64], head: Head) -> Result<Label> {
    if distribution.len() != head.outputs() {
        return Err(Error::Dimension(format!(
            "{} values for a {head:?} head",
            distribution.len()
        )));
    }
    Ok(match head {
        Head::Softmax3 => {
            let mut best = 0;
            for (k, p) in distribution.iter().enumerate() {
                if *p >= distribution[best] {
                    best = k;
                }
            }
            Label::Breakdown(BreakdownLabel::from_index(best).expect("three classes"))
        }
        Head::Sigmoid1 => Label::Sat(if distribution[0] > 0.5 { SatLabel::Sat } else { SatLabel::Dsat }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// 1-based turn index.
    pub turn: usize,
    pub label: Label,
    /// P(SAT) for the sigmoid head, otherwise the probability of `label`.
    pub probability: f64,
    pub distribution: Vec<f64>,
}

impl Prediction {
    fn new(turn: usize, distribution: Vec<f64>, head: Head) -> Result<Self> {
        let label = decide(&distribution, head)?;
        let probability = match head {
            Head::Sigmoid1 => distribution[0],
            Head::Softmax3 => distribution[label.index()],
        };
        Ok(Self {
            turn,
            label,
            probability,
            distribution,
        })
    }
}

/// Expected parameter names and shapes for a configuration.
pub fn param_layout(config: &ModelConfig, vocab_len: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![("word_emb".to_string(), vec![vocab_len, config.word_emb_dim])];
    let lstm = |out: &mut Vec<(String, Vec<usize>)>, prefix: &str, input: usize, hidden: usize| {
        out.push((format!("{prefix}.w_ih"), vec![4 * hidden, input]));
        out.push((format!("{prefix}.w_hh"), vec![4 * hidden, hidden]));
        out.push((format!("{prefix}.bias"), vec![4 * hidden]));
    };
    for side in ["word_u", "word_r"] {
        for dir in ["fwd", "bwd"] {
            lstm(&mut out, &format!("{side}.{dir}"), config.word_emb_dim, config.word_hidden);
        }
    }
    if config.use_chars {
        out.push(("char_emb".to_string(), vec![CHAR_VOCAB_SIZE, config.char_emb_dim]));
        for side in ["char_u", "char_r"] {
            for dir in ["fwd", "bwd"] {
                lstm(&mut out, &format!("{side}.{dir}"), config.char_emb_dim, config.char_hidden);
            }
        }
    }
    let d = config.feature_dim();
    if d > 0 {
        out.push(("att.m".to_string(), vec![d, d]));
        out.push(("att.c".to_string(), vec![d]));
        out.push(("att.b".to_string(), vec![d]));
    }
    lstm(&mut out, "turn", config.representation_dim(), config.turn_hidden);
    out.push(("out.w".to_string(), vec![config.head.outputs(), config.turn_hidden]));
    out.push(("out.b".to_string(), vec![config.head.outputs()]));
    out
}

/// Fresh parameters drawn from a seeded generator.
pub fn init_params(config: &ModelConfig, vocab_len: usize, seed: u64) -> Result<ParamStore> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new(seed, config.precision);
    store.config_hash = config.hash();
    store.insert_uniform("word_emb", vec![vocab_len, config.word_emb_dim], EMBEDDING_BOUND, &mut rng)?;
    for side in ["word_u", "word_r"] {
        for dir in ["fwd", "bwd"] {
            LstmParams::init(config.word_emb_dim, config.word_hidden, &mut rng)
                .register(&mut store, &format!("{side}.{dir}"))?;
        }
    }
    if config.use_chars {
        store.insert_uniform("char_emb", vec![CHAR_VOCAB_SIZE, config.char_emb_dim], EMBEDDING_BOUND, &mut rng)?;
        for side in ["char_u", "char_r"] {
            for dir in ["fwd", "bwd"] {
                LstmParams::init(config.char_emb_dim, config.char_hidden, &mut rng)
                    .register(&mut store, &format!("{side}.{dir}"))?;
            }
        }
    }
    let d = config.feature_dim();
    if d > 0 {
        AttentionParams::init(d, &mut rng).register(&mut store, "att")?;
    }
    LstmParams::init(config.representation_dim(), config.turn_hidden, &mut rng).register(&mut store, "turn")?;
    let k = 1.0 / (config.turn_hidden as f64).sqrt();
    store.insert_uniform("out.w", vec![config.head.outputs(), config.turn_hidden], k, &mut rng)?;
    store.insert("out.b", Tensor::zeros(vec![config.head.outputs()]))?;
    Ok(store)
}

/// Forward and backward encoder pair.
type BiLstm = (LstmNodes, LstmNodes);

/// Graph handles for every model parameter.
struct Handles {
    word_emb: NodeId,
    word_u: BiLstm,
    word_r: BiLstm,
    chars: Option<(NodeId, BiLstm, BiLstm)>,
    att: Option<AttentionNodes>,
    turn: LstmNodes,
    out_w: NodeId,
    out_b: NodeId,
}

impl Handles {
    fn new(config: &ModelConfig, g: &mut Graph) -> Result<Self> {
        let pair = |g: &mut Graph, side: &str| -> Result<(LstmNodes, LstmNodes)> {
            Ok((
                LstmNodes::from_store(g, &format!("{side}.fwd"))?,
                LstmNodes::from_store(g, &format!("{side}.bwd"))?,
            ))
        };
        let word_emb = g.param("word_emb")?;
        let word_u = pair(g, "word_u")?;
        let word_r = pair(g, "word_r")?;
        let chars = if config.use_chars {
            Some((g.param("char_emb")?, pair(g, "char_u")?, pair(g, "char_r")?))
        } else {
            None
        };
        let att = if config.feature_dim() > 0 {
            Some(AttentionNodes::from_store(g, "att")?)
        } else {
            None
        };
        Ok(Self {
            word_emb,
            word_u,
            word_r,
            chars,
            att,
            turn: LstmNodes::from_store(g, "turn")?,
            out_w: g.param("out.w")?,
            out_b: g.param("out.b")?,
        })
    }
}

fn encode_side(g: &mut Graph, table: NodeId, ids: &[usize], enc: &(LstmNodes, LstmNodes)) -> Result<NodeId> {
    let xs = ids.iter().map(|id| g.embed(table, *id)).collect::<Result<Vec<_>>>()?;
    bilstm_last_graph(g, &enc.0, &enc.1, &xs)
}

/// Turn representation `[word U; word R; char U; char R; attended features]`.
fn encode_turn_graph(
    config: &ModelConfig,
    h: &Handles,
    g: &mut Graph,
    turn: &PreparedTurn,
    feature_rows: &[Vec<f64>],
) -> Result<NodeId> {
    let mut parts = vec![
        encode_side(g, h.word_emb, &turn.word_u, &h.word_u)?,
        encode_side(g, h.word_emb, &turn.word_r, &h.word_r)?,
    ];
    if let Some((table, cu, cr)) = &h.chars {
        parts.push(encode_side(g, *table, &turn.char_u, cu)?);
        parts.push(encode_side(g, *table, &turn.char_r, cr)?);
    }
    if let Some(att) = &h.att {
        let d = config.feature_dim();
        if feature_rows.is_empty() || feature_rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("feature rows do not have {d} values")));
        }
        let rows: Vec<NodeId> = feature_rows.iter().map(|r| g.vector(r.clone())).collect();
        parts.push(att.apply(g, &rows)?.0);
    }
    Ok(g.concat(&parts))
}

/// Rows of the attention window ending at 0-based turn `t`.
fn window_rows(config: &ModelConfig, features: &[Vec<f64>], t: usize) -> Vec<Vec<f64>> {
    if config.feature_dim() == 0 {
        return Vec::new();
    }
    let start = (t + 1).saturating_sub(config.window);
    features[start..=t].to_vec()
}

/// Dropout source used while building a training graph.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut ChaCha8Rng,
}

/// Per-turn head outputs for the requested 0-based turns, computed from a
/// single pass of the turn LSTM over the conversation prefix that ends at
/// the last requested turn.
pub fn build_outputs(
    config: &ModelConfig,
    g: &mut Graph,
    conv: &PreparedConversation,
    turns: &[usize],
    mut dropout: Option<Dropout<'_>>,
) -> Result<Vec<NodeId>> {
    if conv.is_empty() {
        return Err(Error::InvalidArgument(format!("conversation `{}` has no turns", conv.id)));
    }
    let Some(&last) = turns.iter().max() else {
        return Ok(Vec::new());
    };
    if last >= conv.len() {
        return Err(Error::OutOfRange(format!("turn {} outside conversation of {}", last + 1, conv.len())));
    }
    let h = Handles::new(config, g)?;
    let mut state = None;
    let mut hidden = Vec::with_capacity(last + 1);
    for t in 0..=last {
        let rows = window_rows(config, &conv.features, t);
        let rep = encode_turn_graph(config, &h, g, &conv.turns[t], &rows)?;
        let s = h.turn.step(g, rep, state)?;
        hidden.push(g.slice(s, 0, config.turn_hidden)?);
        state = Some(s);
    }
    let mut out = Vec::with_capacity(turns.len());
    for &t in turns {
        let mut x = hidden[t];
        if let Some(d) = dropout.as_mut() {
            let mask = dropout_mask(config.turn_hidden, d.rate, d.rng)?;
            x = g.mask(x, mask)?;
        }
        out.push(output_head_graph(g, h.out_w, h.out_b, x, config.head)?);
    }
    Ok(out)
}

/// Mean cross-entropy over `(turn, class)` targets.
pub fn build_loss(
    config: &ModelConfig,
    g: &mut Graph,
    conv: &PreparedConversation,
    targets: &[(usize, usize)],
    dropout: Option<Dropout<'_>>,
) -> Result<NodeId> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument(format!("conversation `{}` has no training targets", conv.id)));
    }
    let turns: Vec<usize> = targets.iter().map(|(t, _)| *t).collect();
    let outputs = build_outputs(config, g, conv, &turns, dropout)?;
    let losses = outputs
        .iter()
        .zip(targets)
        .map(|(o, (_, class))| loss_graph(g, *o, *class, config.head))
        .collect::<Result<Vec<_>>>()?;
    let total = g.sum(&losses)?;
    Ok(g.scale(total, 1.0 / targets.len() as f64))
}

/// Configuration, vocabulary and parameters of a trained or fresh model.
#[derive(Debug, Clone)]
pub struct ConvSatModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    extractor: FeatureExtractor,
}

impl ConvSatModel {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        let store = init_params(&config, vocab.len(), seed)?;
        Self::from_parts(config, vocab, store)
    }

    /// Assemble a model, checking that the parameters match the layout the
    /// configuration and vocabulary imply.
    pub fn from_parts(config: ModelConfig, vocab: Vocab, store: ParamStore) -> Result<Self> {
        config.check()?;
        let layout = param_layout(&config, vocab.len());
        if layout.len() != store.len() {
            return Err(Error::ParamFile(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                store.len()
            )));
        }
        for (name, shape) in &layout {
            match store.get(name) {
                Some(t) if &t.shape == shape => {}
                Some(t) => {
                    return Err(Error::ParamFile(format!(
                        "parameter `{name}` has shape {:?}, expected {shape:?}",
                        t.shape
                    )))
                }
                None => return Err(Error::ParamFile(format!("parameter `{name}` is missing"))),
            }
        }
        let extractor = FeatureExtractor::new(config.schema.clone());
        Ok(Self {
            config,
            vocab,
            store,
            extractor,
        })
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Overwrite word embedding rows for vocabulary words found in
    /// `embeddings`; returns how many rows were replaced.
    pub fn apply_embeddings(&mut self, embeddings: &HashMap<String, Vec<f64>>) -> Result<usize> {
        let dim = self.config.word_emb_dim;
        let precision = self.store.precision;
        let table = self.store.get_mut("word_emb").expect("word_emb is always present");
        let mut replaced = 0;
        for id in 0..self.vocab.len() {
            let Some(vec) = self.vocab.token(id).and_then(|t| embeddings.get(t)) else { continue };
            if vec.len() != dim {
                return Err(Error::Dimension(format!(
                    "embedding width {} does not match word_emb_dim {dim}",
                    vec.len()
                )));
            }
            for (dst, v) in table.data[id * dim..(id + 1) * dim].iter_mut().zip(vec) {
                *dst = precision.round(*v);
            }
            replaced += 1;
        }
        Ok(replaced)
    }

    fn prepare_turn(&self, turns: &[Turn], i: usize) -> Result<PreparedTurn> {
        let c = &self.config;
        let (u, r) = expand_context(turns, i, c.window, c.max_tokens_per_side)?;
        let (char_u, char_r) = if c.use_chars {
            (chars_of(&u), chars_of(&r))
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(PreparedTurn {
            word_u: self.vocab.encode(&u),
            word_r: self.vocab.encode(&r),
            char_u,
            char_r,
        })
    }

    /// Token ids and scaled feature vectors for every turn.
    pub fn prepare(&self, conv: &Conversation) -> Result<PreparedConversation> {
        if conv.is_empty() {
            return Err(Error::InvalidArgument(format!("conversation `{}` has no turns", conv.id)));
        }
        let turns = (1..=conv.len())
            .map(|i| self.prepare_turn(&conv.turns, i))
            .collect::<Result<Vec<_>>>()?;
        let features = if self.config.feature_dim() > 0 {
            self.extractor
                .scaled_vectors(conv)?
                .into_iter()
                .map(|v| v.values)
                .collect()
        } else {
            vec![Vec::new(); conv.len()]
        };
        Ok(PreparedConversation {
            id: conv.id.clone(),
            turns,
            features,
        })
    }

    /// Turn representation of 1-based turn `i`, reading turns `1..=i` only.
    pub fn encode_turn(&self, conv: &Conversation, i: usize) -> Result<Vec<f64>> {
        if i == 0 || i > conv.len() {
            return Err(Error::OutOfRange(format!("turn {i} outside 1..={}", conv.len())));
        }
        let prepared = self.prepare(&conv.prefix(i))?;
        let mut g = Graph::new(&self.store);
        let h = Handles::new(&self.config, &mut g)?;
        let rows = window_rows(&self.config, &prepared.features, i - 1);
        let rep = encode_turn_graph(&self.config, &h, &mut g, &prepared.turns[i - 1], &rows)?;
        Ok(g.value(rep).to_vec())
    }

    /// Output distribution of every turn of a prepared conversation.
    pub fn forward_prepared(&self, conv: &PreparedConversation) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new(&self.store);
        let turns: Vec<usize> = (0..conv.len()).collect();
        let outs = build_outputs(&self.config, &mut g, conv, &turns, None)?;
        Ok(outs.iter().map(|o| g.value(*o).to_vec()).collect())
    }

    /// One distribution per turn in online mode; the final turn's
    /// distribution in offline mode.
    pub fn forward_conversation(&self, conv: &Conversation, mode: OutputMode) -> Result<Vec<Vec<f64>>> {
        let prepared = self.prepare(conv)?;
        match mode {
            OutputMode::Online => self.forward_prepared(&prepared),
            OutputMode::Offline => {
                let mut g = Graph::new(&self.store);
                let outs = build_outputs(&self.config, &mut g, &prepared, &[prepared.len() - 1], None)?;
                Ok(vec![g.value(outs[0]).to_vec()])
            }
        }
    }

    /// Decided predictions in the model's configured mode.
    pub fn predict(&self, conv: &Conversation) -> Result<Vec<Prediction>> {
        let dists = self.forward_conversation(conv, self.config.mode)?;
        let first_turn = match self.config.mode {
            OutputMode::Online => 1,
            OutputMode::Offline => conv.len(),
        };
        dists
            .into_iter()
            .enumerate()
            .map(|(k, d)| Prediction::new(first_turn + k, d, self.config.head))
            .collect()
    }

    /// Incremental predictor for one conversation.
    pub fn online_state(&self, name_provided: Option<bool>, returning_user: Option<bool>) -> OnlineState<'_> {
        OnlineState {
            model: self,
            features: if self.config.feature_dim() > 0 {
                Some(self.extractor.accumulator(name_provided, returning_user))
            } else {
                None
            },
            history: VecDeque::with_capacity(self.config.window),
            rows: VecDeque::with_capacity(self.config.window),
            carry: None,
            turns: 0,
        }
    }

    /// Write `params.bin`, `config.json` and `vocab.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut store = self.store.clone();
        store.config_hash = self.config.hash();
        self.config.save(&dir.join(CONFIG_FILE))?;
        self.vocab.save(&dir.join(VOCAB_FILE))?;
        store.save(&dir.join(PARAMS_FILE))
    }

    /// Load a bundle, refusing parameters written for a different config.
    pub fn load(dir: &Path) -> Result<Self> {
        let config = ModelConfig::load(&dir.join(CONFIG_FILE))?;
        let vocab = Vocab::load(&dir.join(VOCAB_FILE))?;
        let store = ParamStore::load_expecting(&dir.join(PARAMS_FILE), config.precision)?;
        if store.config_hash != config.hash() {
            return Err(Error::ParamFile(format!(
                "parameter file was written for config {} but {} describes {}",
                store.config_hash,
                CONFIG_FILE,
                config.hash()
            )));
        }
        Self::from_parts(config, vocab, store)
    }
}

/// Streaming predictor state: the turn LSTM carry, the last W turns and
/// their scaled feature vectors.
pub struct OnlineState<'m> {
    model: &'m ConvSatModel,
    features: Option<FeatureAccumulator<'m>>,
    history: VecDeque<Turn>,
    rows: VecDeque<Vec<f64>>,
    carry: Option<Vec<f64>>,
    turns: usize,
}

impl OnlineState<'_> {
    pub fn turns_seen(&self) -> usize {
        self.turns
    }

    /// Advance by one turn and return its prediction.
    pub fn step(&mut self, turn: &Turn) -> Result<Prediction> {
        let config = &self.model.config;
        let w = config.window;
        if self.history.len() == w {
            self.history.pop_front();
        }
        self.history.push_back(turn.clone());
        if let Some(acc) = self.features.as_mut() {
            let raw = acc.push(turn)?;
            let scaled = self.model.extractor.scale_feature_vector(&raw, raw.turn_index)?;
            if self.rows.len() == w {
                self.rows.pop_front();
            }
            self.rows.push_back(scaled.values);
        }
        let history = self.history.make_contiguous();
        let prepared = self.model.prepare_turn(history, history.len())?;
        let rows: Vec<Vec<f64>> = self.rows.iter().cloned().collect();

        let mut g = Graph::new(&self.model.store);
        let h = Handles::new(config, &mut g)?;
        let rep = encode_turn_graph(config, &h, &mut g, &prepared, &rows)?;
        let prev = self.carry.as_ref().map(|c| g.vector(c.clone()));
        let s = h.turn.step(&mut g, rep, prev)?;
        let hidden = g.slice(s, 0, config.turn_hidden)?;
        let out = output_head_graph(&mut g, h.out_w, h.out_b, hidden, config.head)?;
        let dist = g.value(out).to_vec();
        self.carry = Some(g.value(s).to_vec());
        self.turns += 1;
        Prediction::new(self.turns, dist, config.head)
    }
}

/// Step `conv` through a fresh [`OnlineState`].
pub fn predict_online(model: &ConvSatModel, conv: &Conversation) -> Result<Vec<Prediction>> {
    let mut state = model.online_state(conv.name_provided, conv.returning_user);
    conv.turns.iter().map(|t| state.step(t)).collect()
}
