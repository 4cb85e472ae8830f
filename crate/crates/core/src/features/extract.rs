//! Per-turn behavioral feature vectors, online scaling and the windowed
//! feature matrix.
//!
//! Extraction is incremental: a [`FeatureAccumulator`] consumes turns in order
//! and emits the unscaled vector for each prefix. Nothing about turn `i + 1`
//! is read while producing the vector for turn `i`.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::engagement::EngagementTracker;
use super::schema::{FeatureId, FeatureSchema, NUM_FEATURES, NUM_TOPICS};
use super::text::{classify_intent, score_sentiment, token_overlap, tokenize, Intent, IntentRuleSet, SentimentLexicon};
use crate::data::{Conversation, SpecialState, Turn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub turn_index: usize,
}

/// Scaled feature vectors for the last `window` turns, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub window: usize,
}

impl FeatureMatrix {
    pub fn row_values(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.values.as_slice()).collect()
    }
}

/// What a turn is "about" for topic features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StateTag {
    Topic(usize),
    Special(SpecialState),
}

impl StateTag {
    fn of(turn: &Turn, schema: &FeatureSchema) -> Option<StateTag> {
        if let Some(s) = turn.special_state {
            return Some(StateTag::Special(s));
        }
        turn.topic
            .as_deref()
            .and_then(|t| schema.topic_index(t))
            .map(StateTag::Topic)
    }

    fn bucket(tag: Option<StateTag>) -> usize {
        match tag {
            Some(StateTag::Topic(k)) => k,
            Some(StateTag::Special(s)) => NUM_TOPICS + s as usize,
            None => NUM_TOPICS + 3,
        }
    }

    fn topic(tag: Option<StateTag>) -> Option<usize> {
        match tag {
            Some(StateTag::Topic(k)) => Some(k),
            _ => None,
        }
    }
}

/// Bundles a schema with the lexical resources used by extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub schema: FeatureSchema,
    pub lexicon: SentimentLexicon,
    pub intents: IntentRuleSet,
}

impl FeatureExtractor {
    pub fn new(schema: FeatureSchema) -> Self {
        Self {
            schema,
            lexicon: SentimentLexicon::default(),
            intents: IntentRuleSet::default(),
        }
    }

    pub fn accumulator(&self, name_provided: Option<bool>, returning_user: Option<bool>) -> FeatureAccumulator<'_> {
        FeatureAccumulator::new(self, name_provided, returning_user)
    }

    pub fn accumulator_for(&self, conversation: &Conversation) -> FeatureAccumulator<'_> {
        self.accumulator(conversation.name_provided, conversation.returning_user)
    }

    /// Unscaled vector for turn `i` (1-based), reading only turns `1..=i`.
    pub fn compute_feature_vector(&self, conversation: &Conversation, i: usize) -> Result<FeatureVector> {
        check_index(conversation, i)?;
        let mut acc = self.accumulator_for(conversation);
        let mut last = None;
        for turn in &conversation.turns[..i] {
            last = Some(acc.push(turn)?);
        }
        Ok(last.expect("i >= 1"))
    }

    pub fn scale_feature_vector(&self, v: &FeatureVector, i: usize) -> Result<FeatureVector> {
        scale_feature_vector(v, i, &self.schema)
    }

    /// Unscaled vectors for every turn.
    pub fn raw_vectors(&self, conversation: &Conversation) -> Result<Vec<FeatureVector>> {
        let mut acc = self.accumulator_for(conversation);
        conversation.turns.iter().map(|t| acc.push(t)).collect()
    }

    /// Scaled vectors for every turn, each scaled by its own index.
    pub fn scaled_vectors(&self, conversation: &Conversation) -> Result<Vec<FeatureVector>> {
        self.raw_vectors(conversation)?
            .iter()
            .map(|v| scale_feature_vector(v, v.turn_index, &self.schema))
            .collect()
    }

    pub fn build_feature_matrix(&self, conversation: &Conversation, i: usize, window: usize) -> Result<FeatureMatrix> {
        if window == 0 {
            return Err(Error::InvalidArgument("context window must be at least 1".into()));
        }
        check_index(conversation, i)?;
        let mut acc = self.accumulator_for(conversation);
        let mut rows = VecDeque::with_capacity(window);
        for turn in &conversation.turns[..i] {
            let raw = acc.push(turn)?;
            if rows.len() == window {
                rows.pop_front();
            }
            rows.push_back(scale_feature_vector(&raw, raw.turn_index, &self.schema)?);
        }
        Ok(FeatureMatrix {
            rows: rows.into(),
            window,
        })
    }

    /// Feature CSV: one row per turn, `conversation_id,turn,<feature names>`.
    pub fn write_csv(&self, w: impl Write, conversations: &[Conversation], scaled: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["conversation_id".to_string(), "turn".to_string()];
        header.extend(self.schema.enabled().map(|e| e.name.clone()));
        out.write_record(&header)?;
        for conv in conversations {
            let vectors = if scaled {
                self.scaled_vectors(conv)?
            } else {
                self.raw_vectors(conv)?
            };
            for v in vectors {
                let mut rec = vec![conv.id.clone(), v.turn_index.to_string()];
                rec.extend(v.values.iter().map(|x| x.to_string()));
                out.write_record(&rec)?;
            }
        }
        out.flush().map_err(|e| Error::io("<feature csv>", e))
    }
}

fn check_index(conversation: &Conversation, i: usize) -> Result<()> {
    if i == 0 || i > conversation.turns.len() {
        return Err(Error::OutOfRange(format!(
            "turn index {i} outside 1..={} for conversation `{}`",
            conversation.turns.len(),
            conversation.id
        )));
    }
    Ok(())
}

/// Apply `S(v, i)`: cumulative features are divided by `i`, every other mode
/// passes through.
pub fn scale_feature_vector(v: &FeatureVector, i: usize, schema: &FeatureSchema) -> Result<FeatureVector> {
    if i == 0 {
        return Err(Error::InvalidArgument("scaling requires turn index >= 1".into()));
    }
    if v.turn_index != i {
        return Err(Error::InvalidArgument(format!(
            "vector belongs to turn {} but was scaled at turn {i}",
            v.turn_index
        )));
    }
    let modes: Vec<_> = schema.enabled().map(|e| e.mode).collect();
    if modes.len() != v.values.len() {
        return Err(Error::Dimension(format!(
            "vector has {} values but schema enables {}",
            v.values.len(),
            modes.len()
        )));
    }
    Ok(FeatureVector {
        values: v.values.iter().zip(modes).map(|(x, m)| m.scale(*x, i)).collect(),
        turn_index: i,
    })
}

/// Running state for incremental feature extraction over one conversation.
#[derive(Debug, Clone)]
pub struct FeatureAccumulator<'a> {
    extractor: &'a FeatureExtractor,
    name_provided: Option<bool>,
    returning_user: Option<bool>,
    turns_seen: usize,
    engagement: EngagementTracker<usize>,
    sum_pos: f64,
    sum_neg: f64,
    prev_tag: Option<StateTag>,
    transitions: usize,
    affirmations: usize,
    negations: usize,
    prev_utterance: String,
    prev_response: String,
    words_u: usize,
    words_r: usize,
    sys_latency_sum: f64,
    sys_latency_max: f64,
    user_latency_sum: f64,
    user_latency_max: f64,
    visited: BTreeSet<usize>,
    accepted: usize,
    rejected: usize,
    prev_proposal: bool,
    buckets: [usize; NUM_FEATURES - 32],
}

impl<'a> FeatureAccumulator<'a> {
    fn new(extractor: &'a FeatureExtractor, name_provided: Option<bool>, returning_user: Option<bool>) -> Self {
        Self {
            extractor,
            name_provided,
            returning_user,
            turns_seen: 0,
            engagement: EngagementTracker::default(),
            sum_pos: 0.0,
            sum_neg: 0.0,
            prev_tag: None,
            transitions: 0,
            affirmations: 0,
            negations: 0,
            prev_utterance: String::new(),
            prev_response: String::new(),
            words_u: 0,
            words_r: 0,
            sys_latency_sum: 0.0,
            sys_latency_max: 0.0,
            user_latency_sum: 0.0,
            user_latency_max: 0.0,
            visited: BTreeSet::new(),
            accepted: 0,
            rejected: 0,
            prev_proposal: false,
            buckets: [0; NUM_FEATURES - 32],
        }
    }

    pub fn turns_seen(&self) -> usize {
        self.turns_seen
    }

    fn needs(&self, ids: std::ops::RangeInclusive<u8>) -> Option<FeatureId> {
        ids.map(FeatureId).find(|id| self.extractor.schema.is_enabled(*id))
    }

    fn missing(&self, ids: std::ops::RangeInclusive<u8>, turn: usize) -> Result<()> {
        match self.needs(ids) {
            Some(id) => Err(Error::MissingFeatureInput {
                feature: id.to_string(),
                turn,
            }),
            None => Ok(()),
        }
    }

    /// Consume the next turn and return its unscaled feature vector.
    pub fn push(&mut self, turn: &Turn) -> Result<FeatureVector> {
        let ex = self.extractor;
        let schema = &ex.schema;
        self.turns_seen += 1;
        let i = self.turns_seen;
        let fi = i as f64;
        let mut all = [0.0f64; NUM_FEATURES];

        let tag = StateTag::of(turn, schema);
        self.engagement.push(StateTag::topic(tag).as_ref());
        let eng = self.engagement.summary();
        all[0] = eng.count as f64;
        all[1] = eng.max_depth as f64;

        let (pos, neg) = score_sentiment(&turn.utterance, &ex.lexicon);
        self.sum_pos += pos;
        self.sum_neg += neg;
        all[2] = pos;
        all[3] = neg;
        all[4] = self.sum_pos / fi;
        all[5] = self.sum_neg / fi;

        if i > 1 && tag != self.prev_tag {
            self.transitions += 1;
        }
        self.prev_tag = tag;
        all[6] = self.transitions as f64 / fi;

        let intent = classify_intent(&turn.utterance, &ex.intents);
        match intent {
            Intent::Affirmation => self.affirmations += 1,
            Intent::Negation => self.negations += 1,
            Intent::Other => {}
        }
        all[7] = self.affirmations as f64 / fi;
        all[8] = self.negations as f64 / fi;

        if i > 1 {
            all[9] = token_overlap(&turn.utterance, &self.prev_utterance) as f64;
            all[10] = token_overlap(&turn.response, &self.prev_response) as f64;
        }
        all[11] = token_overlap(&turn.utterance, &turn.response) as f64;
        self.prev_utterance.clone_from(&turn.utterance);
        self.prev_response.clone_from(&turn.response);

        let wu = tokenize(&turn.utterance).len();
        let wr = tokenize(&turn.response).len();
        self.words_u += wu;
        self.words_r += wr;
        all[12] = self.words_u as f64;
        all[13] = self.words_r as f64;
        all[14] = self.words_u as f64 / fi;
        all[15] = self.words_r as f64 / fi;
        all[16] = wu as f64;
        all[17] = wr as f64;

        match self.name_provided {
            Some(b) => all[18] = f64::from(u8::from(b)),
            None => self.missing(19..=19, i)?,
        }
        match self.returning_user {
            Some(b) => all[19] = f64::from(u8::from(b)),
            None => self.missing(20..=20, i)?,
        }

        match turn.system_latency_s {
            Some(l) => {
                self.sys_latency_sum += l;
                self.sys_latency_max = self.sys_latency_max.max(l);
                all[20] = l;
                all[21] = self.sys_latency_sum / fi;
                all[22] = self.sys_latency_max;
            }
            None => self.missing(21..=23, i)?,
        }
        match turn.user_latency_s {
            Some(l) => {
                self.user_latency_sum += l;
                self.user_latency_max = self.user_latency_max.max(l);
                all[23] = l;
                all[24] = self.user_latency_sum / fi;
                all[25] = self.user_latency_max;
            }
            None => self.missing(24..=26, i)?,
        }

        match &turn.asr_confidences {
            // an empty utterance has no tokens to score; all three stay 0
            Some(conf) if !conf.is_empty() => {
                all[26] = conf.iter().copied().fold(f64::INFINITY, f64::min);
                all[27] = conf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                all[28] = conf.iter().sum::<f64>() / conf.len() as f64;
            }
            Some(_) => {}
            None => self.missing(27..=29, i)?,
        }

        if let Some(k) = StateTag::topic(tag) {
            self.visited.insert(k);
        }
        all[29] = self.visited.len() as f64;

        if self.prev_proposal {
            match intent {
                Intent::Affirmation => self.accepted += 1,
                Intent::Negation => self.rejected += 1,
                Intent::Other => {}
            }
        }
        self.prev_proposal = self.is_proposal(turn, tag);
        all[30] = self.accepted as f64;
        all[31] = self.rejected as f64;

        self.buckets[StateTag::bucket(tag)] += 1;
        for (k, c) in self.buckets.iter().enumerate() {
            all[32 + k] = *c as f64;
        }

        let values: Vec<f64> = schema
            .entries
            .iter()
            .zip(all)
            .filter(|(e, _)| e.enabled)
            .map(|(_, v)| v)
            .collect();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite feature value in column {pos} at turn {i}")));
        }
        Ok(FeatureVector { values, turn_index: i })
    }

    /// A turn proposes a topic when flagged explicitly, or when its response
    /// names a taxonomy topic other than the turn's own.
    fn is_proposal(&self, turn: &Turn, tag: Option<StateTag>) -> bool {
        if let Some(flag) = turn.topic_proposal {
            return flag;
        }
        let own = StateTag::topic(tag);
        let tokens = tokenize(&turn.response);
        self.extractor.schema.topics.iter().enumerate().any(|(k, name)| {
            if Some(k) == own {
                return false;
            }
            let words = tokenize(name);
            !words.is_empty() && tokens.windows(words.len()).any(|w| w == words.as_slice())
        })
    }
}
