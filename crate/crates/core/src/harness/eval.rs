//! Gold targets, evaluation and fold reports.

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, mean_std, MetricsReport};
use crate::data::{folds, rating_to_sat, Conversation};
use crate::error::{Error, Result};
use crate::model::{build_outputs, decide, ConvSatModel, PreparedConversation, Task};
use crate::nn::Graph;

/// `(0-based turn, gold class)` pairs a task scores on one conversation, or
/// `None` when a required label is missing. With `for_eval`, satisfaction
/// tasks skip the final turn, which carries the rating itself.
pub fn conversation_targets(conv: &Conversation, task: Task, for_eval: bool) -> Result<Option<Vec<(usize, usize)>>> {
    let n = conv.len();
    if n == 0 {
        return Err(Error::Validation(format!("conversation `{}` has no turns", conv.id)));
    }
    Ok(match task {
        Task::Breakdown => conv
            .turns
            .iter()
            .enumerate()
            .map(|(t, turn)| turn.gold_breakdown.map(|l| (t, l.index())))
            .collect(),
        Task::SatOnline => {
            let scored = if for_eval && task.excludes_final_turn() { n - 1 } else { n };
            conv.turns[..scored]
                .iter()
                .enumerate()
                .map(|(t, turn)| turn.gold_sat.map(|l| (t, l.index())))
                .collect()
        }
        Task::SatOffline => {
            let label = match conv.final_rating {
                Some(r) => Some(rating_to_sat(r)?),
                None => conv.turns[n - 1].gold_sat,
            };
            label.map(|l| vec![(n - 1, l.index())])
        }
    })
}

/// Targets for every conversation, or an error naming every conversation
/// that lacks a required label.
pub fn dataset_targets(convs: &[Conversation], task: Task, for_eval: bool) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut out = Vec::with_capacity(convs.len());
    let mut missing = Vec::new();
    for conv in convs {
        match conversation_targets(conv, task, for_eval)? {
            Some(t) => out.push(t),
            None => missing.push(conv.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    Ok(out)
}

/// Predicted class for each target of each prepared conversation, in order.
pub fn predict_targets(
    model: &ConvSatModel,
    prepared: &[PreparedConversation],
    targets: &[Vec<(usize, usize)>],
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (conv, tgt) in prepared.iter().zip(targets) {
        if tgt.is_empty() {
            continue;
        }
        let turns: Vec<usize> = tgt.iter().map(|(t, _)| *t).collect();
        let mut g = Graph::new(&model.store);
        let outs = build_outputs(&model.config, &mut g, conv, &turns, None)?;
        for o in outs {
            out.push(decide(g.value(o), model.config.head)?.index());
        }
    }
    Ok(out)
}

/// Gold and predicted class indices for every scored example.
pub fn eval_pairs(model: &ConvSatModel, convs: &[Conversation], task: Task) -> Result<(Vec<usize>, Vec<usize>)> {
    model.config.check_task(task)?;
    let targets = dataset_targets(convs, task, true)?;
    let prepared = convs.iter().map(|c| model.prepare(c)).collect::<Result<Vec<_>>>()?;
    let pred = predict_targets(model, &prepared, &targets)?;
    let gold = targets.iter().flatten().map(|(_, c)| *c).collect();
    Ok((gold, pred))
}

pub fn evaluate(model: &ConvSatModel, convs: &[Conversation], task: Task) -> Result<MetricsReport> {
    let (gold, pred) = eval_pairs(model, convs, task)?;
    let mut report = compute_metrics(&gold, &pred, task)?;
    report.config_hash = Some(model.config.hash());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
}

impl SummaryStat {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

/// Per-fold reports with mean and standard deviation across folds. The
/// folds are a seeded partition of the evaluation set, an approximation of
/// resampled test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub k: usize,
    pub seed: u64,
    pub note: String,
    pub accuracy: SummaryStat,
    pub macro_f1: SummaryStat,
    /// Per-class F1 statistics in class order.
    pub class_f1: Vec<(String, SummaryStat)>,
    pub folds: Vec<MetricsReport>,
}

pub fn evaluate_folds(model: &ConvSatModel, convs: &[Conversation], task: Task, k: usize, seed: u64) -> Result<FoldReport> {
    let parts = folds(convs, k, seed)?;
    let reports = parts
        .iter()
        .map(|f| evaluate(model, f, task))
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = reports.iter().map(|r| r.micro_accuracy).collect();
    let f1: Vec<f64> = reports.iter().map(|r| r.macro_f1).collect();
    let class_f1 = reports[0]
        .per_class
        .iter()
        .enumerate()
        .map(|(c, m)| {
            let vals: Vec<f64> = reports.iter().map(|r| r.per_class[c].f1).collect();
            (m.label.clone(), SummaryStat::of(&vals))
        })
        .collect();
    Ok(FoldReport {
        k,
        seed,
        note: "folds are a seeded disjoint partition of the evaluation set".into(),
        accuracy: SummaryStat::of(&acc),
        macro_f1: SummaryStat::of(&f1),
        class_f1,
        folds: reports,
    })
}
