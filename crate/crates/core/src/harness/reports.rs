use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::{predict, ClassifierModel};
use crate::{Error, Result};

/// `K x K` counts; row = true class, column = predicted class.
pub fn confusion_matrix(
    model: &ClassifierModel,
    test_by_class: &BTreeMap<usize, LabeledDataset>,
) -> Result<Vec<Vec<usize>>> {
    let k = model.num_classes();
    if test_by_class.is_empty() {
        return Err(Error::usage("no test splits"));
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&class, data) in test_by_class {
        if data.is_empty() {
            return Err(Error::usage(format!("test split of class {class} is empty")));
        }
        for (&truth, pred) in data.labels.iter().zip(predict(model, &data.features)?) {
            if truth >= k {
                return Err(Error::InvalidInput(format!("label {truth} out of range")));
            }
            counts[truth][pred] += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Reassignment {
    pub class: usize,
    pub count: usize,
    pub fraction: f64,
}

/// Where forget-class samples are predicted to go, most frequent first
/// (ties by class id). Only classes that receive samples are listed.
pub fn reassignment_report(model: &ClassifierModel, forget_test: &LabeledDataset) -> Result<Vec<Reassignment>> {
    if forget_test.is_empty() {
        return Err(Error::usage("forget test set is empty"));
    }
    let mut counts = vec![0usize; model.num_classes()];
    for p in predict(model, &forget_test.features)? {
        counts[p] += 1;
    }
    let n = forget_test.len() as f64;
    let mut out: Vec<Reassignment> = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(class, count)| Reassignment {
            class,
            count,
            fraction: count as f64 / n,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.class.cmp(&b.class)));
    Ok(out)
}
