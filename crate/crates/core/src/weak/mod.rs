//! Weak supervision for online satisfaction labels and agreement statistics.

mod agreement;
mod rules;

pub use agreement::{cohen_kappa, fleiss_kappa};
pub use rules::{apply_rules, final_label, impute, label_conversation, PartialLabeling, RuleId, MIN_INTENT_RUN};
