//! Training, evaluation, baselines and feature importance.

mod baseline;
mod eval;
mod importance;
mod metrics;
mod train;

pub use baseline::heuristic_baseline_eval;
pub use eval::{
    conversation_targets, dataset_targets, eval_pairs, evaluate, evaluate_folds, predict_targets, FoldReport,
    SummaryStat,
};
pub use importance::{importance_table, permutation_importance, ImportanceRow};
pub use metrics::{class_names, compute_metrics, mean_std, ClassMetrics, MetricsReport, METRICS_SCHEMA_VERSION};
pub use train::{train, EpochLog, TrainConfig, TrainLog};
