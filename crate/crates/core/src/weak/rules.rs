//! Heuristic labeling functions that turn a conversation-level rating into
//! per-turn SAT/DSAT training labels.

use serde::{Deserialize, Serialize};

use crate::data::{rating_to_sat, Conversation, SatLabel, SAT_THRESHOLD};
use crate::error::{Error, Result};
use crate::features::{classify_intent, Intent, IntentRuleSet, MIN_ENGAGEMENT_DEPTH};

/// Minimum length of a run of identical intents that fires a rule.
pub const MIN_INTENT_RUN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    Engagement,
    AffirmRun,
    NegateRun,
    FinalRating,
    Imputed,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Engagement => "engagement",
            RuleId::AffirmRun => "affirm_run",
            RuleId::NegateRun => "negate_run",
            RuleId::FinalRating => "final_rating",
            RuleId::Imputed => "imputed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialLabeling {
    pub labels: Vec<Option<SatLabel>>,
    pub rule_fired: Vec<Option<RuleId>>,
}

impl PartialLabeling {
    fn unlabeled(n: usize) -> Self {
        Self {
            labels: vec![None; n],
            rule_fired: vec![None; n],
        }
    }

    fn set(&mut self, i: usize, label: SatLabel, rule: RuleId) {
        self.labels[i] = Some(label);
        self.rule_fired[i] = Some(rule);
    }

    /// Build a labeling directly, e.g. for imputation tests.
    pub fn from_labels(labels: Vec<Option<SatLabel>>) -> Self {
        let rule_fired = labels.iter().map(|l| l.map(|_| RuleId::FinalRating)).collect();
        Self { labels, rule_fired }
    }
}

/// Index ranges `[start, end)` of maximal runs where `key` is `Some` and
/// constant, at least `min_len` long.
fn long_runs<K: PartialEq>(keys: &[Option<K>], min_len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < keys.len() {
        let mut end = start + 1;
        while end < keys.len() && keys[end].is_some() && keys[end] == keys[start] {
            end += 1;
        }
        if keys[start].is_some() && end - start >= min_len {
            out.push((start, end));
        }
        start = end;
    }
    out
}

/// The label the final turn must carry: an explicit one, else from the rating.
pub fn final_label(conversation: &Conversation, final_sat: Option<SatLabel>) -> Result<SatLabel> {
    match (final_sat, conversation.final_rating) {
        (Some(label), _) => Ok(label),
        (None, Some(r)) => rating_to_sat(r),
        (None, None) => Err(Error::InvalidArgument(format!(
            "conversation `{}` has neither a rating nor a final satisfaction label",
            conversation.id
        ))),
    }
}

/// Apply the engagement, affirmation-run, negation-run and final-rating rules.
/// Later rules override earlier ones on overlap, so precedence is
/// final rating > negation run > affirmation run > engagement.
pub fn apply_rules(
    conversation: &Conversation,
    final_sat: Option<SatLabel>,
    intents: &IntentRuleSet,
) -> Result<PartialLabeling> {
    let last_label = final_label(conversation, final_sat)?;
    let n = conversation.turns.len();
    if n == 0 {
        return Err(Error::Validation(format!("conversation `{}` has no turns", conversation.id)));
    }
    let mut out = PartialLabeling::unlabeled(n);

    let topics: Vec<Option<String>> = conversation
        .turns
        .iter()
        .map(|t| match (&t.special_state, &t.topic) {
            (None, Some(topic)) if !topic.trim().is_empty() => Some(topic.trim().to_lowercase()),
            _ => None,
        })
        .collect();
    for (s, e) in long_runs(&topics, MIN_ENGAGEMENT_DEPTH) {
        (s..e).for_each(|i| out.set(i, SatLabel::Sat, RuleId::Engagement));
    }

    let turn_intents: Vec<Intent> = conversation
        .turns
        .iter()
        .map(|t| classify_intent(&t.utterance, intents))
        .collect();
    let only = |want: Intent| -> Vec<Option<()>> {
        turn_intents.iter().map(|i| (*i == want).then_some(())).collect()
    };
    for (s, e) in long_runs(&only(Intent::Affirmation), MIN_INTENT_RUN) {
        (s..e).for_each(|i| out.set(i, SatLabel::Sat, RuleId::AffirmRun));
    }
    for (s, e) in long_runs(&only(Intent::Negation), MIN_INTENT_RUN) {
        (s..e).for_each(|i| out.set(i, SatLabel::Dsat, RuleId::NegateRun));
    }

    out.set(n - 1, last_label, RuleId::FinalRating);
    Ok(out)
}

/// Fill unlabeled turns left to right: a turn is SAT iff the mean pseudo-rating
/// (SAT = 5, DSAT = 1) of the labeled turns before it exceeds 3.5. With no
/// labeled turn before it, the final turn's label seeds the mean. Imputed
/// turns never feed back into the mean.
pub fn impute(partial: &PartialLabeling) -> Result<Vec<SatLabel>> {
    let seed = partial
        .labels
        .last()
        .copied()
        .flatten()
        .ok_or_else(|| Error::InvalidArgument("imputation requires a labeled final turn".into()))?;
    let (mut sum, mut count) = (0.0, 0usize);
    Ok(partial
        .labels
        .iter()
        .map(|label| match label {
            Some(l) => {
                sum += l.pseudo_rating();
                count += 1;
                *l
            }
            None => {
                let mean = if count == 0 { seed.pseudo_rating() } else { sum / count as f64 };
                if mean > SAT_THRESHOLD {
                    SatLabel::Sat
                } else {
                    SatLabel::Dsat
                }
            }
        })
        .collect())
}

/// Full weak labeling with per-turn provenance.
pub fn label_conversation(
    conversation: &Conversation,
    final_sat: Option<SatLabel>,
    intents: &IntentRuleSet,
) -> Result<(Vec<SatLabel>, Vec<RuleId>)> {
    let partial = apply_rules(conversation, final_sat, intents)?;
    let labels = impute(&partial)?;
    let rules = partial
        .rule_fired
        .iter()
        .map(|r| r.unwrap_or(RuleId::Imputed))
        .collect();
    Ok((labels, rules))
}
