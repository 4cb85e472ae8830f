//! Reader for the Dialogue Breakdown Detection Challenge per-dialogue JSON layout.
//!
//! Each file holds one dialogue as alternating system (`S`) and user (`U`)
//! records. System records that follow a user utterance carry a list of
//! annotator judgements with marks `O`, `T` or `X`. A user utterance and the
//! system reply to it form one [`Turn`]. System records that precede the first
//! user utterance (the opening greeting) are not prediction targets and are
//! skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::labels::majority_vote;
use super::types::{BreakdownLabel, Conversation, Turn, VoteCounts};
use crate::error::{Error, Result};

/// Mapping from annotator marks to breakdown labels.
#[derive(Debug, Clone)]
pub struct MarkMapping(pub BTreeMap<String, BreakdownLabel>);

impl Default for MarkMapping {
    fn default() -> Self {
        MarkMapping(BTreeMap::from([
            ("O".to_string(), BreakdownLabel::NB),
            ("T".to_string(), BreakdownLabel::PB),
            ("X".to_string(), BreakdownLabel::B),
        ]))
    }
}

#[derive(Debug, Deserialize)]
struct RawDialogue {
    #[serde(rename = "dialogue-id")]
    dialogue_id: Option<String>,
    turns: Vec<RawTurn>,
}

#[derive(Debug, Deserialize)]
struct RawTurn {
    speaker: String,
    utterance: String,
    annotations: Option<Vec<RawAnnotation>>,
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    breakdown: String,
}

/// Parse every `*.json` dialogue under `corpus_root` (recursively, in sorted
/// path order) with the default O/T/X mark mapping.
pub fn parse_dbdc3(corpus_root: &Path) -> Result<Vec<Conversation>> {
    parse_dbdc3_with(corpus_root, &MarkMapping::default())
}

pub fn parse_dbdc3_with(corpus_root: &Path, marks: &MarkMapping) -> Result<Vec<Conversation>> {
    let mut files = Vec::new();
    collect_json(corpus_root, &mut files)?;
    files.sort();
    files.iter().map(|f| parse_dialogue_file(f, marks)).collect()
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|ext| ext == "json") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn parse_dialogue_file(path: &Path, marks: &MarkMapping) -> Result<Conversation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fallback_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dialogue_str(&text, &path.display().to_string(), &fallback_id, marks)
}

pub fn parse_dialogue_str(
    text: &str,
    file: &str,
    fallback_id: &str,
    marks: &MarkMapping,
) -> Result<Conversation> {
    let raw: RawDialogue = serde_json::from_str(text).map_err(|e| Error::Parse {
        file: file.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let id = raw.dialogue_id.unwrap_or_else(|| fallback_id.to_string());

    let mut turns = Vec::new();
    let mut pending_user: Option<String> = None;
    let mut seen_user = false;
    for (pos, rec) in raw.turns.iter().enumerate() {
        match rec.speaker.as_str() {
            "U" => {
                seen_user = true;
                if let Some(prev) = pending_user.take() {
                    // two user records in a row: keep both utterances together
                    pending_user = Some(format!("{prev} {}", rec.utterance));
                } else {
                    pending_user = Some(rec.utterance.clone());
                }
            }
            "S" => {
                if !seen_user {
                    continue;
                }
                let annotations = rec
                    .annotations
                    .as_deref()
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "{file}: system record {pos} of dialogue `{id}` has no annotations"
                        ))
                    })?;
                let mut votes = VoteCounts::default();
                for a in annotations {
                    let label = marks.0.get(a.breakdown.as_str()).ok_or_else(|| {
                        Error::Validation(format!(
                            "{file}: unknown breakdown mark `{}` on system record {pos}",
                            a.breakdown
                        ))
                    })?;
                    votes.add(*label);
                }
                let mut turn = Turn::new(
                    turns.len() + 1,
                    pending_user.take().unwrap_or_default(),
                    rec.utterance.clone(),
                );
                turn.gold_breakdown = Some(majority_vote(&votes)?);
                turn.annotator_votes = Some(votes);
                turns.push(turn);
            }
            other => {
                return Err(Error::Validation(format!(
                    "{file}: unknown speaker `{other}` on record {pos}"
                )))
            }
        }
    }
    if turns.is_empty() {
        return Err(Error::Validation(format!("{file}: dialogue `{id}` has no annotated turns")));
    }
    Ok(Conversation::new(id, turns))
}
