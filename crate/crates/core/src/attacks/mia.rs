use serde::{Deserialize, Serialize};

use super::logits::LogitTable;
use super::threshold::{fit_logit_classifier, ThresholdClassifier};
use crate::data::SplitDataset;
use crate::nn::ClassifierModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MiaOutcome {
    /// Percentage of forget samples judged non-members; 100 is ideal.
    pub score: f64,
    pub degenerate: bool,
    pub classifier: ThresholdClassifier,
}

/// Log-probability the model assigns to `label`. Uses `ln_1p` when the label
/// is the top logit so confidences that round to 1 keep their resolution.
pub fn log_label_prob(logits: &[f64], label: usize) -> f64 {
    let zy = logits[label];
    let top = crate::argmax(logits);
    if logits[top] == zy {
        let rest: f64 = logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(_, z)| (z - zy).exp())
            .sum();
        return -rest.ln_1p();
    }
    let m = logits[top];
    let sum: f64 = logits.iter().map(|z| (z - m).exp()).sum();
    zy - m - sum.ln()
}

fn features(t: &LogitTable) -> Vec<f64> {
    (0..t.len()).map(|i| log_label_prob(t.row(i), t.labels[i])).collect()
}

/// Threshold attack on true-label confidence: trained to tell retained test
/// rows (non-members, label 1) from retained training rows (members).
pub fn basic_mia_from_tables(
    members: &LogitTable,
    non_members: &LogitTable,
    forget: &LogitTable,
) -> Result<MiaOutcome> {
    if forget.is_empty() {
        return Err(Error::usage("no forget samples for membership inference"));
    }
    let classifier = fit_logit_classifier(&features(non_members), &features(members))?;
    Ok(MiaOutcome {
        score: 100.0 * classifier.positive_rate(&features(forget)),
        degenerate: classifier.degenerate,
        classifier,
    })
}

pub fn basic_mia_score(target: &ClassifierModel, split: &SplitDataset, f: usize) -> Result<MiaOutcome> {
    let members = LogitTable::from_model(target, &split.retain_train, "train-")?;
    let non_members = LogitTable::from_model(target, &split.retain_test()?, "test-")?;
    let forget_rows: Vec<usize> = (0..split.forget_train.len())
        .filter(|&i| split.forget_train.labels[i] == f)
        .collect();
    let forget = split.forget_train.subset(&forget_rows, "forget");
    let forget = LogitTable::from_model(target, &forget, "forget-")?;
    basic_mia_from_tables(&members, &non_members, &forget)
}
