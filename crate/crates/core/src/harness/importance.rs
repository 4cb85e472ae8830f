//! Permutation importance of behavioral features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{dataset_targets, predict_targets};
use super::metrics::{compute_metrics, mean_std};
use crate::data::Conversation;
use crate::error::{Error, Result};
use crate::features::FeatureId;
use crate::model::{ConvSatModel, PreparedConversation, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub rank: usize,
    pub feature: String,
    pub name: String,
    /// Mean macro-F1 drop over the shuffles.
    pub importance: f64,
    pub std: f64,
}

struct Scorer<'a> {
    model: &'a ConvSatModel,
    task: Task,
    prepared: Vec<PreparedConversation>,
    targets: Vec<Vec<(usize, usize)>>,
    gold: Vec<usize>,
    baseline: f64,
}

impl<'a> Scorer<'a> {
    fn new(model: &'a ConvSatModel, convs: &[Conversation], task: Task) -> Result<Self> {
        model.config.check_task(task)?;
        if model.config.feature_dim() == 0 {
            return Err(Error::InvalidArgument("model was trained without behavioral features".into()));
        }
        let targets = dataset_targets(convs, task, true)?;
        let prepared = convs.iter().map(|c| model.prepare(c)).collect::<Result<Vec<_>>>()?;
        let gold: Vec<usize> = targets.iter().flatten().map(|(_, c)| *c).collect();
        let mut s = Self {
            model,
            task,
            prepared,
            targets,
            gold,
            baseline: 0.0,
        };
        s.baseline = s.macro_f1(&s.prepared)?;
        Ok(s)
    }

    fn macro_f1(&self, prepared: &[PreparedConversation]) -> Result<f64> {
        let pred = predict_targets(self.model, prepared, &self.targets)?;
        Ok(compute_metrics(&self.gold, &pred, self.task)?.macro_f1)
    }

    /// Macro-F1 drops for `repeats` shuffles of one column across all turns.
    fn drops(&self, column: usize, seed: u64, repeats: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = self.prepared.iter().flat_map(|p| p.features.iter().map(|f| f[column])).collect();
        let mut out = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            values.shuffle(&mut rng);
            let mut shuffled = self.prepared.clone();
            let mut it = values.iter();
            for p in &mut shuffled {
                for f in &mut p.features {
                    f[column] = *it.next().expect("same number of turns");
                }
            }
            out.push(self.baseline - self.macro_f1(&shuffled)?);
        }
        Ok(out)
    }
}

/// Mean macro-F1 drop when `feature` is shuffled across the dataset.
pub fn permutation_importance(
    model: &ConvSatModel,
    convs: &[Conversation],
    task: Task,
    feature: FeatureId,
    seed: u64,
    repeats: usize,
) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let column = model.config.schema.column_of(feature)?;
    let scorer = Scorer::new(model, convs, task)?;
    Ok(mean_std(&scorer.drops(column, seed, repeats)?).0)
}

/// Importance of every enabled feature, most important first.
pub fn importance_table(
    model: &ConvSatModel,
    convs: &[Conversation],
    task: Task,
    seed: u64,
    repeats: usize,
) -> Result<Vec<ImportanceRow>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let scorer = Scorer::new(model, convs, task)?;
    let mut rows = Vec::new();
    for (column, entry) in model.config.schema.enabled().enumerate() {
        let (importance, std) = mean_std(&scorer.drops(column, seed, repeats)?);
        rows.push(ImportanceRow {
            rank: 0,
            feature: entry.id.to_string(),
            name: entry.name.clone(),
            importance,
            std,
        });
    }
    rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    for (k, r) in rows.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    Ok(rows)
}
