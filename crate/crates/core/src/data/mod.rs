//! Conversation data model, corpus readers and gold-label derivation.

mod dbdc3;
mod jsonl;
mod labels;
mod split;
mod types;

pub use dbdc3::{parse_dbdc3, parse_dbdc3_with, parse_dialogue_file, parse_dialogue_str, MarkMapping};
pub use jsonl::{parse_jsonl, read_jsonl, write_jsonl, write_jsonl_to};
pub use labels::{majority_vote, rating_to_sat, SAT_THRESHOLD};
pub use split::{folds, split_dataset};
pub use types::{
    BreakdownLabel, Conversation, DatasetSplit, SatLabel, SpecialState, Turn, VoteCounts,
};
