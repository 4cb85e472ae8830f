//! The behavioral feature catalog: ids F1..F51, their scaling modes and
//! which of them are enabled for a given corpus.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SpecialState;
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 51;
pub const NUM_TOPICS: usize = 15;
/// Topic count buckets: the taxonomy topics, the three special states and
/// one bucket for turns with no recognised topic.
pub const NUM_TOPIC_BUCKETS: usize = NUM_TOPICS + 3 + 1;
pub const SCHEMA_VERSION: u32 = 1;

/// How `S(v, i)` treats a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// A count accumulated over turns 1..i; divided by i.
    Cumulative,
    Ratio,
    Instantaneous,
    Binary,
    RunningAggregate,
}

impl ScalingMode {
    pub fn scale(self, value: f64, turn: usize) -> f64 {
        match self {
            ScalingMode::Cumulative => value / turn as f64,
            _ => value,
        }
    }
}

/// Feature identifier, 1-based (`FeatureId(13)` is F13).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub u8);

impl FeatureId {
    pub fn parse(s: &str) -> Result<Self> {
        let digits = s.strip_prefix(['F', 'f']).unwrap_or(s);
        match digits.parse::<u8>() {
            Ok(n) if (1..=NUM_FEATURES as u8).contains(&n) => Ok(FeatureId(n)),
            _ => Err(Error::InvalidArgument(format!("`{s}` is not a feature id in F1..F{NUM_FEATURES}"))),
        }
    }
}

impl std::fmt::Display for FeatureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: FeatureId,
    pub name: String,
    pub mode: ScalingMode,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub entries: Vec<FeatureEntry>,
    /// The 15 topic names. Special states are fixed and follow them.
    pub topics: Vec<String>,
}

pub const DEFAULT_TOPICS: [&str; NUM_TOPICS] = [
    "movies",
    "music",
    "news",
    "sports",
    "weather",
    "wikipedia",
    "travel",
    "books",
    "games",
    "food",
    "animals",
    "technology",
    "science",
    "worldcup",
    "emotional_support",
];

const BASE_FEATURES: [(&str, ScalingMode); 32] = {
    use ScalingMode::*;
    [
        ("NumEngagements", Cumulative),
        ("MaxEngagements", RunningAggregate),
        ("UtterancePos", Instantaneous),
        ("UtteranceNeg", Instantaneous),
        ("AvgPos", RunningAggregate),
        ("AvgNeg", RunningAggregate),
        ("StateChangeRatio", Ratio),
        ("YesRatio", Ratio),
        ("NoRatio", Ratio),
        ("TokenOverlapU", Instantaneous),
        ("TokenOverlapR", Instantaneous),
        ("TokenOverlapUR", Instantaneous),
        ("TotalWordU", Cumulative),
        ("TotalWordR", Cumulative),
        ("AvgWordU", RunningAggregate),
        ("AvgWordR", RunningAggregate),
        ("WordU", Instantaneous),
        ("WordR", Instantaneous),
        ("NameProvided", Binary),
        ("ReturningUser", Binary),
        ("Latency", Instantaneous),
        ("LatencyAvg", RunningAggregate),
        ("LatencyMax", RunningAggregate),
        ("UserLatency", Instantaneous),
        ("UserLatencyAvg", RunningAggregate),
        ("UserLatencyMax", RunningAggregate),
        ("AsrMin", Instantaneous),
        ("AsrMax", Instantaneous),
        ("AsrAvg", Instantaneous),
        ("TopicBreadth", Cumulative),
        ("TotalAcceptedTopics", Cumulative),
        ("TotalRejectedTopics", Cumulative),
    ]
};

impl FeatureSchema {
    /// Every feature enabled, default topic taxonomy.
    pub fn full() -> Self {
        Self::with_topics(DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect())
            .expect("default taxonomy has 15 topics")
    }

    pub fn with_topics(topics: Vec<String>) -> Result<Self> {
        if topics.len() != NUM_TOPICS {
            return Err(Error::InvalidArgument(format!(
                "topic taxonomy must list {NUM_TOPICS} topics, got {}",
                topics.len()
            )));
        }
        let mut entries: Vec<FeatureEntry> = BASE_FEATURES
            .iter()
            .enumerate()
            .map(|(k, (name, mode))| FeatureEntry {
                id: FeatureId(k as u8 + 1),
                name: name.to_string(),
                mode: *mode,
                enabled: true,
            })
            .collect();
        let bucket_names = topics
            .iter()
            .map(|t| format!("Topic_{t}"))
            .chain(SpecialState::ALL.iter().map(|s| format!("State_{}", s.as_str())))
            .chain(std::iter::once("Topic_Untagged".to_string()));
        for (k, name) in bucket_names.enumerate() {
            entries.push(FeatureEntry {
                id: FeatureId((BASE_FEATURES.len() + k + 1) as u8),
                name,
                mode: ScalingMode::Cumulative,
                enabled: true,
            });
        }
        let schema = Self {
            version: SCHEMA_VERSION,
            entries,
            topics,
        };
        schema.check()?;
        Ok(schema)
    }

    /// Text-only preset: latency, ASR, session and topic-derived features off.
    pub fn dbdc3() -> Self {
        let mut schema = Self::full();
        for e in &mut schema.entries {
            let n = e.id.0;
            e.enabled = !(matches!(n, 1 | 2 | 7) || n >= 19);
        }
        schema
    }

    /// Copy with every feature disabled.
    pub fn none() -> Self {
        let mut schema = Self::full();
        schema.entries.iter_mut().for_each(|e| e.enabled = false);
        schema
    }

    pub fn check(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "feature schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.entries.len() != NUM_FEATURES
            || self.entries.iter().enumerate().any(|(k, e)| e.id.0 as usize != k + 1)
        {
            return Err(Error::Validation(format!(
                "feature schema must list F1..F{NUM_FEATURES} exactly once, in order"
            )));
        }
        if self.topics.len() != NUM_TOPICS {
            return Err(Error::Validation(format!(
                "topic taxonomy must list {NUM_TOPICS} topics, got {}",
                self.topics.len()
            )));
        }
        Ok(())
    }

    pub fn entry(&self, id: FeatureId) -> &FeatureEntry {
        &self.entries[id.0 as usize - 1]
    }

    pub fn is_enabled(&self, id: FeatureId) -> bool {
        self.entry(id).enabled
    }

    pub fn set_enabled(&mut self, id: FeatureId, enabled: bool) {
        self.entries[id.0 as usize - 1].enabled = enabled;
    }

    pub fn enabled(&self) -> impl Iterator<Item = &FeatureEntry> {
        self.entries.iter().filter(|e| e.enabled)
    }

    pub fn enabled_len(&self) -> usize {
        self.enabled().count()
    }

    /// Column of `id` within an enabled-only vector.
    pub fn column_of(&self, id: FeatureId) -> Result<usize> {
        if !self.is_enabled(id) {
            return Err(Error::FeatureDisabled(id.to_string()));
        }
        Ok(self.entries[..id.0 as usize - 1].iter().filter(|e| e.enabled).count())
    }

    /// The 18 taxonomy entries: topics followed by special states.
    pub fn taxonomy(&self) -> Vec<String> {
        self.topics
            .iter()
            .cloned()
            .chain(SpecialState::ALL.iter().map(|s| s.as_str().to_string()))
            .collect()
    }

    /// Index of `topic` in the taxonomy, compared case-insensitively.
    pub fn topic_index(&self, topic: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.eq_ignore_ascii_case(topic.trim()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Self = serde_json::from_str(&text)?;
        schema.check()?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
