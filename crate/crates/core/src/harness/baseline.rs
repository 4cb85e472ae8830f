//! The heuristic-labeling baseline: weak-label rules used as a predictor.

use super::eval::dataset_targets;
use super::metrics::{compute_metrics, MetricsReport};
use crate::data::Conversation;
use crate::error::{Error, Result};
use crate::features::IntentRuleSet;
use crate::model::Task;
use crate::weak::label_conversation;

/// Score rule-derived satisfaction labels against gold on every non-final
/// turn. The final turn is where the rating rule fires, so it is not scored;
/// the rating still seeds imputation for turns no rule covers.
pub fn heuristic_baseline_eval(convs: &[Conversation], intents: &IntentRuleSet) -> Result<MetricsReport> {
    let task = Task::SatOnline;
    let missing_rating: Vec<String> = convs
        .iter()
        .filter(|c| c.final_rating.is_none())
        .map(|c| c.id.clone())
        .collect();
    if !missing_rating.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "the heuristic baseline needs a rating on every conversation; missing on {}",
            missing_rating.join(", ")
        )));
    }
    let targets = dataset_targets(convs, task, true)?;
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (conv, tgt) in convs.iter().zip(&targets) {
        let (labels, _) = label_conversation(conv, None, intents)?;
        for (t, g) in tgt {
            gold.push(*g);
            pred.push(labels[*t].index());
        }
    }
    compute_metrics(&gold, &pred, task)
}
