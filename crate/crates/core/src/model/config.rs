//! Model hyperparameters, task definitions and presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::nn::{Head, Precision};

/// Whether the turn LSTM emits one prediction per turn or one at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Online,
    Offline,
}

/// Prediction task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Three-way breakdown label on every turn.
    Breakdown,
    /// Satisfaction on every turn.
    SatOnline,
    /// Satisfaction once per conversation.
    SatOffline,
}

impl Task {
    pub fn head(self) -> Head {
        match self {
            Task::Breakdown => Head::Softmax3,
            Task::SatOnline | Task::SatOffline => Head::Sigmoid1,
        }
    }

    pub fn mode(self) -> OutputMode {
        match self {
            Task::Breakdown | Task::SatOnline => OutputMode::Online,
            Task::SatOffline => OutputMode::Offline,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Breakdown => "breakdown",
            Task::SatOnline => "sat-online",
            Task::SatOffline => "sat-offline",
        }
    }

    /// Whether evaluation skips the last turn of each conversation. The last
    /// turn of a satisfaction conversation carries the rating itself.
    pub fn excludes_final_turn(self) -> bool {
        matches!(self, Task::SatOnline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Context window W in turns.
    pub window: usize,
    pub word_emb_dim: usize,
    pub char_emb_dim: usize,
    pub word_hidden: usize,
    pub char_hidden: usize,
    pub turn_hidden: usize,
    pub head: Head,
    pub mode: OutputMode,
    pub schema: FeatureSchema,
    pub dropout: f64,
    pub lr: f64,
    pub max_tokens_per_side: usize,
    pub use_chars: bool,
    pub use_features: bool,
    pub min_count: usize,
    pub freeze_embeddings: bool,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 3,
            word_emb_dim: 300,
            char_emb_dim: 32,
            word_hidden: 100,
            char_hidden: 32,
            turn_hidden: 128,
            head: Head::Sigmoid1,
            mode: OutputMode::Online,
            schema: FeatureSchema::full(),
            dropout: 0.5,
            lr: 1e-4,
            max_tokens_per_side: 128,
            use_chars: true,
            use_features: true,
            min_count: 1,
            freeze_embeddings: false,
            precision: Precision::Single,
        }
    }
}

pub const PRESETS: [&str; 4] = ["convsat", "dbdc3", "lstm", "clstm"];

impl ModelConfig {
    /// Named configuration adapted to `task`: `convsat` (full model),
    /// `dbdc3` (hidden 64 with the reduced feature schema), `lstm` (W = 1,
    /// words only) and `clstm` (W = 3, words only).
    pub fn preset(name: &str, task: Task) -> Result<Self> {
        let mut c = Self::default().for_task(task);
        match name {
            "convsat" => {}
            "dbdc3" => {
                c.word_hidden = 64;
                c.schema = FeatureSchema::dbdc3();
            }
            "lstm" => {
                c.window = 1;
                c.use_chars = false;
                c.use_features = false;
            }
            "clstm" => {
                c.use_chars = false;
                c.use_features = false;
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(c)
    }

    pub fn for_task(mut self, task: Task) -> Self {
        self.head = task.head();
        self.mode = task.mode();
        self
    }

    pub fn check(&self) -> Result<()> {
        let dims = [
            ("window", self.window),
            ("word_emb_dim", self.word_emb_dim),
            ("word_hidden", self.word_hidden),
            ("turn_hidden", self.turn_hidden),
            ("max_tokens_per_side", self.max_tokens_per_side),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.use_chars && (self.char_emb_dim == 0 || self.char_hidden == 0) {
            return Err(Error::InvalidArgument("character dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.lr)));
        }
        self.schema.check()
    }

    /// Errors unless the head and output mode match `task`.
    pub fn check_task(&self, task: Task) -> Result<()> {
        if self.head != task.head() || self.mode != task.mode() {
            return Err(Error::InvalidArgument(format!(
                "model with {:?} head in {:?} mode cannot serve the {} task",
                self.head,
                self.mode,
                task.as_str()
            )));
        }
        Ok(())
    }

    /// Width of the behavioral feature part of a turn representation.
    pub fn feature_dim(&self) -> usize {
        if self.use_features {
            self.schema.enabled_len()
        } else {
            0
        }
    }

    /// Width of the word and character encoder outputs.
    pub fn encoder_dim(&self) -> usize {
        let chars = if self.use_chars { 4 * self.char_hidden } else { 0 };
        4 * self.word_hidden + chars
    }

    /// Width of the turn representation fed to the turn LSTM.
    pub fn representation_dim(&self) -> usize {
        self.encoder_dim() + self.feature_dim()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Self = serde_json::from_str(&text)?;
        c.check()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}
