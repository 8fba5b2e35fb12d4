use std::collections::{BTreeMap, BTreeSet};

use super::LabeledDataset;
use crate::{Error, Result};

/// Forget/retain partition of a training set plus per-class test subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    /// Training rows whose label is a forget class (`D_f`).
    pub forget_train: LabeledDataset,
    /// All other training rows (`D_r`).
    pub retain_train: LabeledDataset,
    /// Held-out test rows keyed by class; covers every class.
    pub test_by_class: BTreeMap<usize, LabeledDataset>,
    pub forget_classes: BTreeSet<usize>,
}

/// The part of a split a from-scratch retrain is allowed to see.
#[derive(Debug, Clone, Copy)]
pub struct RetainView<'a> {
    pub retain_train: &'a LabeledDataset,
    pub test_by_class: &'a BTreeMap<usize, LabeledDataset>,
}

impl SplitDataset {
    pub fn num_classes(&self) -> usize {
        self.retain_train.num_classes()
    }

    pub fn retained_classes(&self) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|c| !self.forget_classes.contains(c))
            .collect()
    }

    pub fn retain_view(&self) -> RetainView<'_> {
        RetainView {
            retain_train: &self.retain_train,
            test_by_class: &self.test_by_class,
        }
    }

    pub fn test_class(&self, class: usize) -> Result<&LabeledDataset> {
        self.test_by_class
            .get(&class)
            .ok_or_else(|| Error::usage(format!("no test data for class {class}")))
    }

    /// Test rows of all retained classes, ascending class order.
    pub fn retain_test(&self) -> Result<LabeledDataset> {
        self.concat_test(|c| !self.forget_classes.contains(&c), "retain-test")
    }

    /// Test rows of all forget classes, ascending class order.
    pub fn forget_test(&self) -> Result<LabeledDataset> {
        self.concat_test(|c| self.forget_classes.contains(&c), "forget-test")
    }

    /// Test rows of a single forget class (`D_{f-test}`).
    pub fn forget_test_of(&self, class: usize) -> Result<&LabeledDataset> {
        if !self.forget_classes.contains(&class) {
            return Err(Error::usage(format!("class {class} is not a forget class")));
        }
        self.test_class(class)
    }

    fn concat_test(&self, keep: impl Fn(usize) -> bool, name: &str) -> Result<LabeledDataset> {
        let mut parts = self.test_by_class.iter().filter(|(c, _)| keep(**c)).map(|(_, d)| d);
        let first = parts
            .next()
            .ok_or_else(|| Error::usage(format!("{name} is empty")))?;
        parts.try_fold(first.clone(), |acc, d| acc.concat(d, name))
    }
}

/// Partitions `train` into forget and retain rows and groups `test` by class.
/// Row order inside every partition follows the input order.
pub fn split_forget(
    train: &LabeledDataset,
    test: &LabeledDataset,
    forget_classes: &BTreeSet<usize>,
) -> Result<SplitDataset> {
    let k = train.num_classes();
    if forget_classes.is_empty() {
        return Err(Error::usage("no forget classes given"));
    }
    if test.class_ids != train.class_ids {
        return Err(Error::usage("train and test vocabularies differ"));
    }
    if train.dim() != test.dim() {
        return Err(Error::Shape {
            expected: train.dim(),
            actual: test.dim(),
        });
    }
    for &f in forget_classes {
        if f >= k || !train.labels.contains(&f) {
            return Err(Error::usage(format!("forget class {f} absent from training labels")));
        }
    }
    let forget_train = train.filter_by_label(|l| forget_classes.contains(&l), "forget-train");
    let retain_train = train.filter_by_label(|l| !forget_classes.contains(&l), "retain-train");
    if retain_train.is_empty() {
        return Err(Error::usage("forgetting every class leaves an empty retain set"));
    }
    let mut test_by_class = BTreeMap::new();
    for c in 0..k {
        let part = test.filter_by_label(|l| l == c, &format!("test-{c}"));
        if part.is_empty() {
            return Err(Error::usage(format!("test set has no samples of class {c}")));
        }
        test_by_class.insert(c, part);
    }
    Ok(SplitDataset {
        forget_train,
        retain_train,
        test_by_class,
        forget_classes: forget_classes.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn dataset(labels: &[usize], k: usize) -> LabeledDataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        LabeledDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            labels.to_vec(),
            LabeledDataset::numeric_classes(k),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn forget_one_of_three() {
        let train = dataset(&[0, 1, 2, 0, 1, 2, 0], 3);
        let test = dataset(&[0, 1, 2], 3);
        let s = split_forget(&train, &test, &BTreeSet::from([0])).unwrap();
        assert!(s.retain_train.labels.iter().all(|&l| l != 0));
        assert!(s.forget_train.labels.iter().all(|&l| l == 0));
        assert_eq!(s.forget_train.len() + s.retain_train.len(), train.len());
        assert_eq!(s.test_by_class.len(), 3);
        assert_eq!(s.retained_classes(), vec![1, 2]);
    }

    #[test]
    fn forgetting_everything_is_rejected() {
        let train = dataset(&[0, 1, 1], 2);
        let test = dataset(&[0, 1], 2);
        assert!(matches!(
            split_forget(&train, &test, &BTreeSet::from([0, 1])),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            split_forget(&train, &test, &BTreeSet::from([5])),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn multi_class_forget_set() {
        let labels: Vec<usize> = (0..50).map(|i| i % 10).collect();
        let train = dataset(&labels, 10);
        let test = dataset(&(0..10).collect::<Vec<_>>(), 10);
        let s = split_forget(&train, &test, &BTreeSet::from([0, 1])).unwrap();
        let got: BTreeSet<usize> = s.forget_train.labels.iter().copied().collect();
        assert_eq!(got, BTreeSet::from([0, 1]));
    }

    proptest! {
        #[test]
        fn partition_is_complete_and_disjoint(
            labels in proptest::collection::vec(0usize..4, 1..60),
            forget_pick in 0usize..4,
        ) {
            let train = dataset(&labels, 4);
            let test = dataset(&[0, 1, 2, 3], 4);
            let forget = BTreeSet::from([forget_pick]);
            match split_forget(&train, &test, &forget) {
                Ok(s) => {
                    prop_assert_eq!(s.forget_train.len() + s.retain_train.len(), labels.len());
                    prop_assert!(s.forget_train.labels.iter().all(|l| forget.contains(l)));
                    prop_assert!(s.retain_train.labels.iter().all(|l| !forget.contains(l)));
                    // Feature column holds the original row index: order and membership preserved.
                    let mut idx: Vec<usize> = s.forget_train.features.as_slice().iter()
                        .chain(s.retain_train.features.as_slice())
                        .map(|v| *v as usize).collect();
                    let f_idx: Vec<usize> = s.forget_train.features.as_slice().iter().map(|v| *v as usize).collect();
                    prop_assert!(f_idx.windows(2).all(|w| w[0] < w[1]));
                    idx.sort_unstable();
                    prop_assert_eq!(idx, (0..labels.len()).collect::<Vec<_>>());
                }
                Err(Error::Usage(_)) => {
                    prop_assert!(!labels.contains(&forget_pick) || labels.iter().all(|&l| l == forget_pick));
                }
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
