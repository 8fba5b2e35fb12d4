use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a [`ProbVector`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability distribution over class labels `0..K`.
///
/// Entry `k` is the mass on class `k`. Forget classes stay in the vector as
/// explicit zeros so that every distribution over the same label space has
/// the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector {
    mass: Vec<f64>,
}

impl ProbVector {
    /// Validates nonnegativity and normalisation.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if let Some(v) = mass.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid probability {v}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(ProbVector { mass })
    }

    /// Normalises nonnegative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidInput(format!(
                "weights must have positive finite total, got {total}"
            )));
        }
        ProbVector::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn from_raw(mass: Vec<f64>) -> Self {
        ProbVector { mass }
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Self {
        let mut mass = vec![0.0; num_classes];
        mass[class] = 1.0;
        ProbVector { mass }
    }

    pub fn uniform(num_classes: usize) -> Self {
        ProbVector {
            mass: vec![1.0 / num_classes as f64; num_classes],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn get(&self, class: usize) -> f64 {
        self.mass[class]
    }

    pub fn class_ids(&self) -> std::ops::Range<usize> {
        0..self.mass.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.mass
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.mass)
    }

    /// `KL(self || other)` in nats, with `0 log 0 = 0`.
    pub fn kl(&self, other: &ProbVector) -> f64 {
        kl_divergence(&self.mass, &other.mass)
    }

    pub fn max_abs_diff(&self, other: &ProbVector) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> ProbVector {
    ProbVector::from_raw(softmax_vec(logits))
}

pub(crate) fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
