//! Mini-batch training with early stopping on validation macro-F1.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{dataset_targets, predict_targets};
use super::metrics::compute_metrics;
use crate::data::Conversation;
use crate::error::{Error, Result};
use crate::model::{build_loss, ConvSatModel, Dropout, ModelConfig, Task, Vocab};
use crate::nn::{adam_step, AdamConfig, AdamState, Gradients, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Epoch cap.
    pub epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    /// Conversations per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Stop as soon as validation macro-F1 reaches this value.
    pub stop_at_macro_f1: Option<f64>,
    /// Validation share when the caller splits a single training file.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            patience: 5,
            batch_size: 16,
            seed: 13,
            stop_at_macro_f1: None,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub task: Task,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub stop_reason: String,
}

impl TrainLog {
    /// Equality on everything except wall-clock timings.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        let strip = |l: &TrainLog| {
            let mut l = l.clone();
            l.epochs.iter_mut().for_each(|e| e.wall_time_s = 0.0);
            l
        };
        strip(self) == strip(other)
    }
}

/// Train a fresh model. The vocabulary comes from `train_set` only; the
/// returned model holds the parameters of the best validation epoch.
pub fn train(
    config: &ModelConfig,
    train_set: &[Conversation],
    val_set: &[Conversation],
    task: Task,
    tc: &TrainConfig,
    embeddings: Option<&HashMap<String, Vec<f64>>>,
) -> Result<(ConvSatModel, TrainLog)> {
    config.check()?;
    config.check_task(task)?;
    tc.check()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    let train_targets = dataset_targets(train_set, task, false)?;
    let val_targets = dataset_targets(val_set, task, true)?;
    if train_targets.iter().all(Vec::is_empty) || val_targets.iter().all(Vec::is_empty) {
        return Err(Error::InvalidArgument("no scored turns in the training or validation set".into()));
    }

    let vocab = Vocab::build(train_set, config.min_count)?;
    let mut model = ConvSatModel::new(config.clone(), vocab, tc.seed)?;
    if let Some(emb) = embeddings {
        let n = model.apply_embeddings(emb)?;
        log::info!("initialized {n} of {} word embeddings from file", model.vocab.len());
    }
    let mut adam = AdamState::new(
        &model.store,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    if config.freeze_embeddings {
        adam.freeze(model.store.index_of("word_emb").expect("word_emb is always present"));
    }

    let train_prepared = train_set.iter().map(|c| model.prepare(c)).collect::<Result<Vec<_>>>()?;
    let val_prepared = val_set.iter().map(|c| model.prepare(c)).collect::<Result<Vec<_>>>()?;
    let val_gold: Vec<usize> = val_targets.iter().flatten().map(|(_, c)| *c).collect();
    let trainable: Vec<usize> = (0..train_prepared.len()).filter(|&k| !train_targets[k].is_empty()).collect();

    let mut order_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut log = TrainLog {
        task,
        seed: tc.seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_macro_f1: f64::NEG_INFINITY,
        stop_reason: "epoch cap reached".into(),
    };
    let mut best_store = model.store.clone();

    for epoch in 1..=tc.epochs {
        let started = Instant::now();
        let mut order = trainable.clone();
        order.shuffle(&mut order_rng);
        let mut loss_total = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let mut grads = Gradients::zeros_like(&model.store);
            for &k in batch {
                let mut drop_rng = ChaCha8Rng::seed_from_u64(order_rng.gen());
                let mut g = Graph::new(&model.store);
                let dropout = (config.dropout > 0.0).then_some(Dropout {
                    rate: config.dropout,
                    rng: &mut drop_rng,
                });
                let loss = build_loss(&model.config, &mut g, &train_prepared[k], &train_targets[k], dropout)?;
                loss_total += g.scalar(loss);
                grads.add_assign(&g.backward(loss)?)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            if !grads.is_finite() {
                return Err(Error::Validation(format!("non-finite gradient in epoch {epoch}")));
            }
            adam_step(&mut model.store, &grads, &mut adam)?;
        }

        let pred = predict_targets(&model, &val_prepared, &val_targets)?;
        let metrics = compute_metrics(&val_gold, &pred, task)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss_total / order.len() as f64,
            val_accuracy: metrics.micro_accuracy,
            val_macro_f1: metrics.macro_f1,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, val accuracy {:.4}, val macro-F1 {:.4}",
            entry.train_loss,
            entry.val_accuracy,
            entry.val_macro_f1
        );
        log.epochs.push(entry);

        if metrics.macro_f1 > log.best_val_macro_f1 {
            log.best_val_macro_f1 = metrics.macro_f1;
            log.best_epoch = epoch;
            best_store.clone_from(&model.store);
        }
        if tc.stop_at_macro_f1.is_some_and(|t| metrics.macro_f1 >= t) {
            log.stop_reason = "target validation macro-F1 reached".into();
            break;
        }
        if epoch - log.best_epoch > tc.patience {
            log.stop_reason = format!("no improvement for {} epochs", tc.patience + 1);
            break;
        }
    }

    model.store = best_store;
    model.store.config_hash = model.config.hash();
    Ok((model, log))
}
