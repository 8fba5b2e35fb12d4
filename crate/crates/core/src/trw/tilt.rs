use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimilarityProfile;
use crate::matrix::Matrix;
use crate::nn::ClassifierModel;
use crate::prob::{softmax, ProbVector};
use crate::{Error, Result};

pub const DEFAULT_BETA: f64 = 10.0;

/// Forget-class mass at or above `1 - DEGENERATE_MASS` cannot be reweighted.
pub const DEGENERATE_MASS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltConfig {
    pub beta: f64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        TiltConfig { beta: DEFAULT_BETA }
    }
}

/// Target expected similarity `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub c: f64,
}

pub fn reweight(p: &ProbVector, forget_class: usize) -> Result<ProbVector> {
    reweight_excluding(p, &BTreeSet::from([forget_class]))
}

/// Zeroes every class in `forget` and renormalises the rest.
pub fn reweight_excluding(p: &ProbVector, forget: &BTreeSet<usize>) -> Result<ProbVector> {
    if let Some(&bad) = forget.iter().find(|&&f| f >= p.len()) {
        return Err(Error::usage(format!("forget class {bad} outside {} classes", p.len())));
    }
    let forget_mass: f64 = forget.iter().map(|&f| p.get(f)).sum();
    if forget_mass >= 1.0 - DEGENERATE_MASS {
        return Err(Error::DegenerateMass { mass: forget_mass });
    }
    let retained: f64 = p
        .mass()
        .iter()
        .enumerate()
        .filter(|(y, _)| !forget.contains(y))
        .map(|(_, v)| v)
        .sum();
    Ok(ProbVector::from_raw(
        p.mass()
            .iter()
            .enumerate()
            .map(|(y, &v)| if forget.contains(&y) { 0.0 } else { v / retained })
            .collect(),
    ))
}

/// Exponential tilt `q(y) ∝ ptilde(y) exp(beta * s_y)`. Classes with zero
/// `ptilde` stay at zero; `scores` has one entry per class.
pub fn tilt_scores(ptilde: &ProbVector, scores: &[f64], beta: f64) -> Result<ProbVector> {
    if scores.len() != ptilde.len() {
        return Err(Error::Shape {
            expected: ptilde.len(),
            actual: scores.len(),
        });
    }
    if !beta.is_finite() {
        return Err(Error::config(format!("beta must be finite, got {beta}")));
    }
    let exponents: Vec<Option<f64>> = ptilde
        .mass()
        .iter()
        .zip(scores)
        .map(|(&p, &s)| (p > 0.0).then_some(beta * s))
        .collect();
    let max = exponents
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidInput("reweighted distribution has no retained mass".into()));
    }
    let weights: Vec<f64> = ptilde
        .mass()
        .iter()
        .zip(&exponents)
        .map(|(&p, e)| e.map_or(0.0, |e| p * (e - max).exp()))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(ProbVector::from_raw(weights.into_iter().map(|w| w / total).collect()))
}

pub fn tilt(ptilde: &ProbVector, profile: &SimilarityProfile, beta: f64) -> Result<ProbVector> {
    if ptilde.get(profile.forget_class) != 0.0 {
        return Err(Error::InvalidInput("tilt input must be zero on the forget class".into()));
    }
    for (y, &m) in ptilde.mass().iter().enumerate() {
        if m > 0.0 && !profile.scores.contains_key(&y) {
            return Err(Error::InvalidInput(format!("class {y} has mass but no score")));
        }
    }
    tilt_scores(ptilde, &profile.score_vector(ptilde.len()), beta)
}

/// `m(beta)`: expected score under the tilted distribution.
pub fn moment(ptilde: &ProbVector, scores: &[f64], beta: f64) -> Result<f64> {
    let q = tilt_scores(ptilde, scores, beta)?;
    Ok(q.mass().iter().zip(scores).map(|(q, s)| q * s).sum())
}

/// `Var_q(s)` under the tilted distribution, i.e. `m'(beta)`.
pub fn moment_variance(ptilde: &ProbVector, scores: &[f64], beta: f64) -> Result<f64> {
    let q = tilt_scores(ptilde, scores, beta)?;
    let mean: f64 = q.mass().iter().zip(scores).map(|(q, s)| q * s).sum();
    Ok(q.mass().iter().zip(scores).map(|(q, s)| q * (s - mean) * (s - mean)).sum())
}

/// Finds `beta` with `|m(beta) - c| < tol` by bisection on the strictly
/// increasing `m`. The bracket starts at `[-1, 1]` and doubles outward until
/// it straddles `c`.
pub fn solve_beta(ptilde: &ProbVector, scores: &[f64], constraint: MomentConstraint, tol: f64) -> Result<f64> {
    if scores.len() != ptilde.len() {
        return Err(Error::Shape {
            expected: ptilde.len(),
            actual: scores.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let support: Vec<f64> = ptilde
        .mass()
        .iter()
        .zip(scores)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, s)| *s)
        .collect();
    let min = support.iter().copied().fold(f64::INFINITY, f64::min);
    let max = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if support.is_empty() || min == max {
        return Err(Error::InvalidInput("scores are constant on the support".into()));
    }
    let c = constraint.c;
    if !(c > min && c < max) {
        return Err(Error::OutOfHull { target: c, min, max });
    }

    let m = |b: f64| moment(ptilde, scores, b);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    const MAX_BRACKET: f64 = 1e12;
    while m(hi)? < c {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(Error::InvalidInput(format!("moment {c} not reached below beta = {hi}")));
        }
    }
    while m(lo)? > c {
        hi = lo;
        lo *= 2.0;
        if lo < -MAX_BRACKET {
            return Err(Error::InvalidInput(format!("moment {c} not reached above beta = {lo}")));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let value = m(mid)?;
        if (value - c).abs() < tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            return Err(Error::InvalidInput(format!(
                "bisection stalled at beta = {mid} with residual {}",
                value - c
            )));
        }
        if value < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Per-sample intermediate values of the target pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TiltTrace {
    pub sample: usize,
    pub p: ProbVector,
    /// `None` when the forget mass was degenerate and the scores were used.
    pub ptilde: Option<ProbVector>,
    pub scores: Vec<f64>,
    pub beta: f64,
    pub q: ProbVector,
}

/// Forward, softmax, reweight and tilt each row of `samples`.
///
/// When a sample puts (almost) all mass on the forget classes the target
/// falls back to the similarity scores themselves.
pub fn trace_forget_targets(
    model: &ClassifierModel,
    samples: &Matrix,
    forget: &BTreeSet<usize>,
    profile: &SimilarityProfile,
    cfg: TiltConfig,
) -> Result<Vec<TiltTrace>> {
    let k = model.num_classes();
    let scores = profile.score_vector(k);
    let fallback = ProbVector::from_weights(scores.clone())?;
    samples
        .iter_rows()
        .enumerate()
        .map(|(i, x)| {
            let p = softmax(&model.forward(x)?);
            let (ptilde, q) = match reweight_excluding(&p, forget) {
                Ok(pt) => {
                    let q = tilt(&pt, profile, cfg.beta)?;
                    (Some(pt), q)
                }
                Err(Error::DegenerateMass { .. }) => (None, fallback.clone()),
                Err(e) => return Err(e),
            };
            Ok(TiltTrace {
                sample: i,
                p,
                ptilde,
                scores: scores.clone(),
                beta: cfg.beta,
                q,
            })
        })
        .collect()
}

pub fn build_forget_targets(
    model: &ClassifierModel,
    samples: &Matrix,
    forget_class: usize,
    profile: &SimilarityProfile,
    cfg: TiltConfig,
) -> Result<Vec<ProbVector>> {
    Ok(trace_forget_targets(model, samples, &BTreeSet::from([forget_class]), profile, cfg)?
        .into_iter()
        .map(|t| t.q)
        .collect())
}
