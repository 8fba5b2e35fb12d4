//! Labelled datasets, the synthetic Gaussian toy, IDX ingestion and
//! forget/retain partitioning.

mod gaussian;
mod idx;
mod split;

pub use gaussian::{gen_gaussian_mixture, toy3_spec, toy5_spec, ClassBlob, GaussianMixtureSpec};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use split::{split_forget, RetainView, SplitDataset};

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Label vocabulary; label `k` names `class_ids[k]`.
    pub class_ids: Vec<String>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_ids: Vec<String>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::usage("dataset must contain at least one sample"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_ids.len()) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside vocabulary of {} classes",
                class_ids.len()
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_ids,
            name: name.into(),
        })
    }

    /// Vocabulary `"0", "1", ...` for `k` classes.
    pub fn numeric_classes(k: usize) -> Vec<String> {
        (0..k).map(|c| c.to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows satisfying `keep(label)`, in input order. May be empty.
    pub(crate) fn filter_by_label(&self, keep: impl Fn(usize) -> bool, name: &str) -> LabeledDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.subset(&idx, name)
    }

    pub(crate) fn subset(&self, idx: &[usize], name: &str) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_ids: self.class_ids.clone(),
            name: name.to_string(),
        }
    }

    /// Concatenation of two datasets over the same vocabulary.
    pub fn concat(&self, other: &LabeledDataset, name: &str) -> Result<LabeledDataset> {
        if self.class_ids != other.class_ids {
            return Err(Error::usage("cannot concatenate datasets with different vocabularies"));
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledDataset {
            features: self.features.vstack(&other.features)?,
            labels,
            class_ids: self.class_ids.clone(),
            name: name.to_string(),
        })
    }

    /// Keeps the first `per_class` rows of each class, preserving order.
    pub fn take_per_class(&self, per_class: usize) -> LabeledDataset {
        let mut seen = vec![0usize; self.num_classes()];
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = &mut seen[self.labels[i]];
                *c += 1;
                *c <= per_class
            })
            .collect();
        self.subset(&idx, &self.name)
    }
}
