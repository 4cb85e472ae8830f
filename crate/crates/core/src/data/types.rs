use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dialogue breakdown label. Variants are declared in severity order so that
/// `Ord` ranks `B` as the most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BreakdownLabel {
    NB,
    PB,
    B,
}

impl BreakdownLabel {
    pub const ALL: [BreakdownLabel; 3] = [BreakdownLabel::NB, BreakdownLabel::PB, BreakdownLabel::B];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BreakdownLabel::NB => "NB",
            BreakdownLabel::PB => "PB",
            BreakdownLabel::B => "B",
        }
    }
}

impl fmt::Display for BreakdownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BreakdownLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NB" => Ok(BreakdownLabel::NB),
            "PB" => Ok(BreakdownLabel::PB),
            "B" => Ok(BreakdownLabel::B),
            other => Err(Error::InvalidArgument(format!("unknown breakdown label `{other}`"))),
        }
    }
}

/// Binary satisfaction label, ordered `DSAT < SAT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SatLabel {
    #[serde(rename = "DSAT")]
    Dsat,
    #[serde(rename = "SAT")]
    Sat,
}

impl SatLabel {
    pub const ALL: [SatLabel; 2] = [SatLabel::Dsat, SatLabel::Sat];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SatLabel::Dsat => "DSAT",
            SatLabel::Sat => "SAT",
        }
    }

    /// Pseudo-rating used by label imputation.
    pub fn pseudo_rating(self) -> f64 {
        match self {
            SatLabel::Sat => 5.0,
            SatLabel::Dsat => 1.0,
        }
    }
}

impl fmt::Display for SatLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SatLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SAT" => Ok(SatLabel::Sat),
            "DSAT" => Ok(SatLabel::Dsat),
            other => Err(Error::InvalidArgument(format!("unknown satisfaction label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpecialState {
    Stop,
    Profanity,
    Clarification,
}

impl SpecialState {
    pub const ALL: [SpecialState; 3] = [
        SpecialState::Stop,
        SpecialState::Profanity,
        SpecialState::Clarification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpecialState::Stop => "Stop",
            SpecialState::Profanity => "Profanity",
            SpecialState::Clarification => "Clarification",
        }
    }
}

/// Annotator vote counts per breakdown label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCounts {
    #[serde(rename = "NB")]
    pub nb: u32,
    #[serde(rename = "PB")]
    pub pb: u32,
    #[serde(rename = "B")]
    pub b: u32,
}

impl VoteCounts {
    pub fn new(nb: u32, pb: u32, b: u32) -> Self {
        Self { nb, pb, b }
    }

    pub fn get(&self, label: BreakdownLabel) -> u32 {
        match label {
            BreakdownLabel::NB => self.nb,
            BreakdownLabel::PB => self.pb,
            BreakdownLabel::B => self.b,
        }
    }

    pub fn add(&mut self, label: BreakdownLabel) {
        match label {
            BreakdownLabel::NB => self.nb += 1,
            BreakdownLabel::PB => self.pb += 1,
            BreakdownLabel::B => self.b += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.nb + self.pb + self.b
    }
}

/// One user-utterance / system-response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub utterance: String,
    pub response: String,
    pub asr_confidences: Option<Vec<f64>>,
    pub system_latency_s: Option<f64>,
    pub user_latency_s: Option<f64>,
    pub topic: Option<String>,
    pub special_state: Option<SpecialState>,
    pub gold_breakdown: Option<BreakdownLabel>,
    pub gold_sat: Option<SatLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_votes: Option<VoteCounts>,
    /// Whether the system response of this turn offers a new topic.
    /// When absent, proposals are inferred from the response text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_proposal: Option<bool>,
}

impl Turn {
    /// A bare turn with only text filled in.
    pub fn new(index: usize, utterance: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            index,
            utterance: utterance.into(),
            response: response.into(),
            asr_confidences: None,
            system_latency_s: None,
            user_latency_s: None,
            topic: None,
            special_state: None,
            gold_breakdown: None,
            gold_sat: None,
            annotator_votes: None,
            topic_proposal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    #[serde(rename = "rating")]
    pub final_rating: Option<f64>,
    pub name_provided: Option<bool>,
    pub returning_user: Option<bool>,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(id: impl Into<String>, turns: Vec<Turn>) -> Self {
        Self {
            id: id.into(),
            final_rating: None,
            name_provided: None,
            returning_user: None,
            turns,
        }
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Copy of this conversation restricted to its first `n` turns.
    pub fn prefix(&self, n: usize) -> Conversation {
        Conversation {
            turns: self.turns[..n.min(self.turns.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Checks every structural invariant. On failure returns the offending
    /// field path together with a message.
    pub fn check(&self) -> std::result::Result<(), (String, String)> {
        if self.turns.is_empty() {
            return Err(("turns".into(), "conversation has no turns".into()));
        }
        if let Some(r) = self.final_rating {
            if !(1.0..=5.0).contains(&r) {
                return Err(("rating".into(), format!("rating {r} outside [1.0, 5.0]")));
            }
        }
        for (pos, turn) in self.turns.iter().enumerate() {
            let path = |f: &str| format!("turns[{pos}].{f}");
            if turn.index != pos + 1 {
                return Err((
                    path("index"),
                    format!("expected contiguous 1-based index {}, found {}", pos + 1, turn.index),
                ));
            }
            if let Some(conf) = &turn.asr_confidences {
                if let Some((k, c)) = conf.iter().enumerate().find(|(_, c)| !(0.0..=1.0).contains(*c)) {
                    return Err((
                        format!("turns[{pos}].asr_confidences[{k}]"),
                        format!("confidence {c} outside [0.0, 1.0]"),
                    ));
                }
            }
            for (name, v) in [
                ("system_latency_s", turn.system_latency_s),
                ("user_latency_s", turn.user_latency_s),
            ] {
                if let Some(v) = v {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err((path(name), format!("latency {v} must be finite and non-negative")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(field, message)| {
            Error::Validation(format!("conversation `{}`: {field}: {message}", self.id))
        })
    }
}

/// Train/validation/test partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Conversation>,
    pub validation: Vec<Conversation>,
    pub test: Vec<Conversation>,
    pub seed: u64,
}
