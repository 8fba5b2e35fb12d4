//! Privacy audits of unlearned models: the nearest-neighbour membership
//! attack, a confidence-threshold MIA and a shadow-model likelihood-ratio test.

mod logits;
mod mia;
mod miann;
mod threshold;
mod ulira;

pub use logits::LogitTable;
pub use mia::{basic_mia_from_tables, basic_mia_score, log_label_prob, MiaOutcome};
pub use miann::{
    class_acc, miann_report, miann_report_from_tables, miann_score, nearest_neighbor_class,
    nearest_neighbor_from_tables, AttackReport, ClassAcc,
};
pub use threshold::{fit_logit_classifier, Polarity, ThresholdClassifier};
pub use ulira::{
    margin_statistic, ulira_from_tables, ulira_leave_one_out, ulira_shadow_set, ulira_simplified, Arm,
    ShadowSet, VARIANCE_FLOOR,
};
