use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logits::LogitTable;
use super::threshold::{fit_logit_classifier, ThresholdClassifier};
use crate::data::SplitDataset;
use crate::nn::ClassifierModel;
use crate::{Error, Result};

const NEGATIVE_STREAM: u64 = 0x0E6A_71FE_5A3B_1E00;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackReport {
    pub per_class_mean_acc: BTreeMap<usize, f64>,
    pub nearest_neighbor: usize,
    pub retrain_reference_acc: f64,
    pub target_acc: f64,
    pub gap: f64,
    pub n_retrain_models: usize,
    /// The classifier fitted on the target's logits had no usable split.
    pub degenerate: bool,
}

impl AttackReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Accuracy of one logit-`class` detector on forget samples of class `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassAcc {
    pub acc: f64,
    pub classifier: ThresholdClassifier,
}

/// Fits `h` on logit `class` with label 1 on that class's test rows and 0 on
/// the other retained test rows (subsampled to equal size), then returns the
/// fraction of class-`f` rows labelled 1.
pub fn class_acc(table: &LogitTable, class: usize, f: usize, forget: &BTreeSet<usize>) -> Result<ClassAcc> {
    if forget.contains(&class) || class >= table.num_classes() {
        return Err(Error::usage(format!("class {class} is not a retained class")));
    }
    let value = |i: usize| table.row(i)[class];
    let pos: Vec<f64> = table.rows_where(|l| l == class).into_iter().map(value).collect();
    let mut neg_rows = table.rows_where(|l| l != class && !forget.contains(&l));
    let targets: Vec<f64> = table.rows_where(|l| l == f).into_iter().map(value).collect();
    if targets.is_empty() {
        return Err(Error::usage(format!("no test samples for forget class {f}")));
    }
    if pos.is_empty() || neg_rows.is_empty() {
        return Err(Error::usage(format!("class {class} lacks positive or negative test samples")));
    }
    if neg_rows.len() > pos.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(NEGATIVE_STREAM ^ class as u64);
        let mut keep = sample(&mut rng, neg_rows.len(), pos.len()).into_vec();
        keep.sort_unstable();
        neg_rows = keep.into_iter().map(|k| neg_rows[k]).collect();
    }
    let neg: Vec<f64> = neg_rows.into_iter().map(value).collect();
    let classifier = fit_logit_classifier(&pos, &neg)?;
    Ok(ClassAcc {
        acc: classifier.positive_rate(&targets),
        classifier,
    })
}

/// Mean detector accuracy per retained class across retrain models, and the
/// class with the highest mean (lowest id on ties).
pub fn nearest_neighbor_from_tables(
    retrain: &[LogitTable],
    f: usize,
    forget: &BTreeSet<usize>,
) -> Result<(usize, BTreeMap<usize, f64>)> {
    let first = retrain.first().ok_or_else(|| Error::usage("need at least one retrain model"))?;
    let k = first.num_classes();
    let mut means = BTreeMap::new();
    for class in (0..k).filter(|c| !forget.contains(c)) {
        let mut total = 0.0;
        for t in retrain {
            total += class_acc(t, class, f, forget)?.acc;
        }
        means.insert(class, total / retrain.len() as f64);
    }
    let mut best: Option<(usize, f64)> = None;
    for (&c, &m) in &means {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((c, m));
        }
    }
    let (rn, _) = best.ok_or_else(|| Error::usage("no retained classes"))?;
    Ok((rn, means))
}

pub fn miann_report_from_tables(
    retrain: &[LogitTable],
    target: &LogitTable,
    f: usize,
    forget: &BTreeSet<usize>,
) -> Result<AttackReport> {
    let (rn, means) = nearest_neighbor_from_tables(retrain, f, forget)?;
    let t = class_acc(target, rn, f, forget)?;
    let reference = means[&rn];
    Ok(AttackReport {
        per_class_mean_acc: means,
        nearest_neighbor: rn,
        retrain_reference_acc: reference,
        target_acc: t.acc,
        gap: reference - t.acc,
        n_retrain_models: retrain.len(),
        degenerate: t.classifier.degenerate,
    })
}

fn test_tables(models: &[ClassifierModel], split: &SplitDataset) -> Result<Vec<LogitTable>> {
    models.iter().map(|m| LogitTable::from_split_test(m, split)).collect()
}

pub fn nearest_neighbor_class(
    retrain: &[ClassifierModel],
    split: &SplitDataset,
    f: usize,
) -> Result<(usize, BTreeMap<usize, f64>)> {
    nearest_neighbor_from_tables(&test_tables(retrain, split)?, f, &split.forget_classes)
}

/// `Acc_{r_n}` of `target`: the detector is refitted on the target's own logits.
pub fn miann_score(target: &ClassifierModel, rn: usize, split: &SplitDataset, f: usize) -> Result<f64> {
    let t = LogitTable::from_split_test(target, split)?;
    Ok(class_acc(&t, rn, f, &split.forget_classes)?.acc)
}

pub fn miann_report(
    retrain: &[ClassifierModel],
    target: &ClassifierModel,
    split: &SplitDataset,
    f: usize,
) -> Result<AttackReport> {
    let target = LogitTable::from_split_test(target, split)?;
    miann_report_from_tables(&test_tables(retrain, split)?, &target, f, &split.forget_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    // Three classes, forget class 2. Class 0's logit on forget rows is high.
    fn table(forget_boost: f64) -> LogitTable {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let v = i as f64 / 20.0;
            rows.push(vec![2.0 + v, 0.0 + v, 0.0]);
            labels.push(0);
            rows.push(vec![0.0 + v, 2.0 + v, 0.0]);
            labels.push(1);
            rows.push(vec![2.5 + v + forget_boost, 0.5 + v, 1.0]);
            labels.push(2);
        }
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        LogitTable::new(ids, labels, Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn dominant_class_is_nearest() {
        let forget = BTreeSet::from([2]);
        let (rn, means) = nearest_neighbor_from_tables(&[table(0.0)], 2, &forget).unwrap();
        assert_eq!(rn, 0);
        assert_eq!(means[&0], 1.0);
        assert_eq!(means.keys().copied().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn single_model_mean_is_its_own_accuracy() {
        let forget = BTreeSet::from([2]);
        let t = table(-1.0);
        let (_, means) = nearest_neighbor_from_tables(std::slice::from_ref(&t), 2, &forget).unwrap();
        for (&c, &m) in &means {
            assert_eq!(m, class_acc(&t, c, 2, &forget).unwrap().acc);
        }
        let r = miann_report_from_tables(std::slice::from_ref(&t), &t, 2, &forget).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.n_retrain_models, 1);
    }

    #[test]
    fn constant_target_is_flagged() {
        let forget = BTreeSet::from([2]);
        let mut flat = table(0.0);
        flat.logits = Matrix::zeros(flat.len(), 3);
        let r = miann_report_from_tables(&[table(0.0)], &flat, 2, &forget).unwrap();
        assert!(r.degenerate);
        assert!(r.target_acc == 0.0 || r.target_acc == 1.0);
    }

    #[test]
    fn missing_forget_rows_is_usage_error() {
        let t = table(0.0);
        let keep = t.rows_where(|l| l != 2);
        let trimmed = LogitTable::new(
            keep.iter().map(|&i| t.sample_ids[i].clone()).collect(),
            keep.iter().map(|&i| t.labels[i]).collect(),
            t.logits.select_rows(&keep),
        )
        .unwrap();
        assert!(matches!(
            class_acc(&trimmed, 0, 2, &BTreeSet::from([2])),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn report_json_keys_sorted() {
        let forget = BTreeSet::from([2]);
        let r = miann_report_from_tables(&[table(0.0)], &table(-2.0), 2, &forget).unwrap();
        let json = r.to_json().unwrap();
        for key in ["perClassMeanAcc", "nearestNeighbor", "retrainReferenceAcc", "targetAcc", "gap", "nRetrainModels"] {
            assert!(json.contains(key), "{key}");
        }
        let back: AttackReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn boosting_neighbor_logit_never_lowers_score(
            noise in prop::collection::vec(-1.0f64..1.0, 60),
            boost in 0.0f64..3.0,
        ) {
            let forget = BTreeSet::from([2]);
            let mut base = table(0.0);
            for (i, n) in noise.iter().enumerate() {
                let v = base.logits.get(i, 0) + n;
                base.logits.set(i, 0, v);
            }
            let mut boosted = base.clone();
            for i in boosted.rows_where(|l| l == 2) {
                let v = boosted.logits.get(i, 0) + boost;
                boosted.logits.set(i, 0, v);
            }
            let a = class_acc(&base, 0, 2, &forget).unwrap();
            let b = class_acc(&boosted, 0, 2, &forget).unwrap();
            prop_assert_eq!(a.classifier, b.classifier);
            if a.classifier.polarity == super::super::Polarity::Above {
                prop_assert!(b.acc >= a.acc);
            }
        }
    }
}
