//! Classification metrics: micro accuracy, per-class and macro
//! precision/recall/F1, and confusion matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{BreakdownLabel, SatLabel};
use crate::error::{Error, Result};
use crate::model::Task;

/// Version of the metrics JSON layout.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Class names of a task in index order.
pub fn class_names(task: Task) -> Vec<&'static str> {
    match task {
        Task::Breakdown => BreakdownLabel::ALL.iter().map(|l| l.as_str()).collect(),
        Task::SatOnline | Task::SatOffline => SatLabel::ALL.iter().map(|l| l.as_str()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold examples of this class.
    pub support: u64,
    /// Set when any of the three values was a 0/0 reported as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub task: Task,
    pub config_hash: Option<String>,
    pub n_examples: u64,
    pub micro_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Metrics of predicted class indices against gold class indices.
pub fn compute_metrics(gold: &[usize], pred: &[usize], task: Task) -> Result<MetricsReport> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty set of predictions".into()));
    }
    let names = class_names(task);
    let k = names.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        if *g >= k || *p >= k {
            return Err(Error::OutOfRange(format!("class index outside 0..{k}")));
        }
        confusion[*g][*p] += 1;
    }
    let n = gold.len() as u64;
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let predicted: u64 = (0..k).map(|g| confusion[g][c]).sum();
            let support: u64 = confusion[c].iter().sum();
            let (precision, p0) = ratio(tp, predicted);
            let (recall, r0) = ratio(tp, support);
            let (f1, f0) = if precision + recall == 0.0 {
                (0.0, true)
            } else {
                (2.0 * precision * recall / (precision + recall), false)
            };
            ClassMetrics {
                label: names[c].to_string(),
                precision,
                recall,
                f1,
                support,
                zero_division: p0 || r0 || f0,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        schema_version: METRICS_SCHEMA_VERSION,
        task,
        config_hash: None,
        n_examples: n,
        micro_accuracy: correct as f64 / n as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
        confusion,
    })
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    /// Plain-text table with AC/PR/RC/F1 columns per class and a macro row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task {}  n={}  AC {:.4}", self.task.as_str(), self.n_examples, self.micro_accuracy);
        let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8} {:>8}", "class", "PR", "RC", "F1", "support");
        for c in &self.per_class {
            let flag = if c.zero_division { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>8}{flag}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(
            s,
            "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>8}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.n_examples
        );
        if self.per_class.iter().any(|c| c.zero_division) {
            let _ = writeln!(s, "* a 0/0 ratio was reported as 0");
        }
        s
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NB: usize = 0;
    const PB: usize = 1;
    const B: usize = 2;

    #[test]
    fn perfect_predictions() {
        let g = [NB, PB, B, B];
        let r = compute_metrics(&g, &g, Task::Breakdown).unwrap();
        assert_eq!(r.micro_accuracy, 1.0);
        assert!(r.per_class.iter().all(|c| c.f1 == 1.0));
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn hand_worked_breakdown_case() {
        let r = compute_metrics(&[B, B, NB, PB], &[B, NB, NB, PB], Task::Breakdown).unwrap();
        assert_eq!(r.micro_accuracy, 0.75);
        let b = r.class("B").unwrap();
        assert_eq!((b.precision, b.recall), (1.0, 0.5));
        assert!((b.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn absent_class_is_zero_and_flagged() {
        let r = compute_metrics(&[NB, NB], &[NB, NB], Task::Breakdown).unwrap();
        let pb = r.class("PB").unwrap();
        assert_eq!((pb.precision, pb.recall, pb.f1), (0.0, 0.0, 0.0));
        assert!(pb.zero_division);
        assert!(!r.class("NB").unwrap().zero_division);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.to_table().contains('*'));
    }

    #[test]
    fn errors_on_bad_input() {
        assert!(compute_metrics(&[0], &[0, 1], Task::SatOnline).is_err());
        assert!(compute_metrics(&[], &[], Task::SatOnline).is_err());
        assert!(compute_metrics(&[2], &[0], Task::SatOnline).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_class_relabeling(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..60)) {
            let (g, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let perm = [2usize, 0, 1];
            let g2: Vec<usize> = g.iter().map(|c| perm[*c]).collect();
            let p2: Vec<usize> = p.iter().map(|c| perm[*c]).collect();
            let a = compute_metrics(&g, &p, Task::Breakdown).unwrap();
            let b = compute_metrics(&g2, &p2, Task::Breakdown).unwrap();
            prop_assert_eq!(a.micro_accuracy, b.micro_accuracy);
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            let total: u64 = a.confusion.iter().flatten().sum();
            prop_assert_eq!(total, a.n_examples);
            for c in &a.per_class {
                prop_assert!((0.0..=1.0).contains(&c.f1));
            }
        }
    }
}
