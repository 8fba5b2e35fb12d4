use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::logits::LogitTable;
use crate::data::SplitDataset;
use crate::nn::ClassifierModel;
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Unlearned,
    Retrain,
}

#[derive(Debug, Clone)]
pub struct ShadowSet {
    pub unlearned_models: Vec<ClassifierModel>,
    pub retrain_models: Vec<ClassifierModel>,
}

/// `z_f - max_{y retained} z_y`.
pub fn margin_statistic(logits: &[f64], f: usize, forget: &BTreeSet<usize>) -> f64 {
    let best = logits
        .iter()
        .enumerate()
        .filter(|(y, _)| !forget.contains(y))
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    logits[f] - best
}

fn gaussian_fit(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

fn log_density(x: f64, (mean, var): (f64, f64)) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln())
}

/// Per-sample margins on the class-`f` rows of each table.
fn margins(tables: &[&LogitTable], f: usize, forget: &BTreeSet<usize>) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(tables.len());
    for t in tables {
        let rows = t.rows_where(|l| l == f);
        if rows.is_empty() {
            return Err(Error::usage(format!("no test samples for forget class {f}")));
        }
        if let Some(prev) = out.first() {
            if prev.len() != rows.len() {
                return Err(Error::Shape {
                    expected: prev.len(),
                    actual: rows.len(),
                });
            }
        }
        out.push(rows.into_iter().map(|i| margin_statistic(t.row(i), f, forget)).collect());
    }
    Ok(out)
}

/// Fraction of forget samples on which a per-sample likelihood-ratio test
/// assigns `target` to `target_arm`. Exact ties count as half correct.
pub fn ulira_from_tables(
    unlearned: &[LogitTable],
    retrain: &[LogitTable],
    target: &LogitTable,
    target_arm: Arm,
    f: usize,
    forget: &BTreeSet<usize>,
) -> Result<f64> {
    if unlearned.len() < 2 || retrain.len() < 2 {
        return Err(Error::usage("each shadow arm needs at least two models"));
    }
    let all: Vec<&LogitTable> = unlearned.iter().chain(retrain).chain([target]).collect();
    let stats = margins(&all, f, forget)?;
    let (u, r) = stats.split_at(unlearned.len());
    let (r, t) = r.split_at(retrain.len());
    let t = &t[0];
    let mut correct = 0.0;
    for i in 0..t.len() {
        let column = |arm: &[Vec<f64>]| arm.iter().map(|m| m[i]).collect::<Vec<f64>>();
        let llr = log_density(t[i], gaussian_fit(&column(u))) - log_density(t[i], gaussian_fit(&column(r)));
        correct += match (llr.partial_cmp(&0.0), target_arm) {
            (Some(std::cmp::Ordering::Greater), Arm::Unlearned) | (Some(std::cmp::Ordering::Less), Arm::Retrain) => 1.0,
            (Some(std::cmp::Ordering::Equal), _) => 0.5,
            _ => 0.0,
        };
    }
    Ok(correct / t.len() as f64)
}

/// Leave-target-out accuracy: every model of both arms is the target once.
/// One model of the other arm is dropped as well so both shadow arms keep the
/// same size, averaging over which one. Needs at least three models per arm.
pub fn ulira_leave_one_out(
    unlearned: &[LogitTable],
    retrain: &[LogitTable],
    f: usize,
    forget: &BTreeSet<usize>,
) -> Result<f64> {
    if unlearned.len() < 3 || retrain.len() < 3 {
        return Err(Error::usage("leave-one-out U-LiRA needs at least three models per arm"));
    }
    let without = |v: &[LogitTable], i: usize| -> Vec<LogitTable> {
        v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.clone()).collect()
    };
    let mut total = 0.0;
    for i in 0..unlearned.len() {
        let mut acc = 0.0;
        for j in 0..retrain.len() {
            acc += ulira_from_tables(&without(unlearned, i), &without(retrain, j), &unlearned[i], Arm::Unlearned, f, forget)?;
        }
        total += acc / retrain.len() as f64;
    }
    for i in 0..retrain.len() {
        let mut acc = 0.0;
        for j in 0..unlearned.len() {
            acc += ulira_from_tables(&without(unlearned, j), &without(retrain, i), &retrain[i], Arm::Retrain, f, forget)?;
        }
        total += acc / unlearned.len() as f64;
    }
    Ok(total / (unlearned.len() + retrain.len()) as f64)
}

fn forget_tables(models: &[ClassifierModel], split: &SplitDataset, f: usize) -> Result<Vec<LogitTable>> {
    let data = split.forget_test_of(f)?;
    models.iter().map(|m| LogitTable::from_model(m, data, "forget-test-")).collect()
}

/// Accuracy of identifying `target`'s arm against the given shadows.
pub fn ulira_simplified(
    shadows: &ShadowSet,
    target: &ClassifierModel,
    target_arm: Arm,
    split: &SplitDataset,
    f: usize,
) -> Result<f64> {
    let u = forget_tables(&shadows.unlearned_models, split, f)?;
    let r = forget_tables(&shadows.retrain_models, split, f)?;
    let t = forget_tables(std::slice::from_ref(target), split, f)?;
    ulira_from_tables(&u, &r, &t[0], target_arm, f, &split.forget_classes)
}

/// Leave-target-out accuracy over all models of a shadow set.
pub fn ulira_shadow_set(shadows: &ShadowSet, split: &SplitDataset, f: usize) -> Result<f64> {
    let u = forget_tables(&shadows.unlearned_models, split, f)?;
    let r = forget_tables(&shadows.retrain_models, split, f)?;
    ulira_leave_one_out(&u, &r, f, &split.forget_classes)
}
