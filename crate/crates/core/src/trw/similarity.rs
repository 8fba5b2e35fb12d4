use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::ClassifierModel;
use crate::prob::softmax_vec;
use crate::{Error, Result};

/// Similarity of each retained class to one forget class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityProfile {
    /// Softmax-normalised scores `s_y`; sums to 1 over retained classes.
    pub scores: BTreeMap<usize, f64>,
    /// Similarities before the softmax: cosines for weight-based profiles,
    /// inverse distances for centroid-based ones.
    pub raw_similarity: BTreeMap<usize, f64>,
    pub d_prime: usize,
    pub temperature: f64,
    pub forget_class: usize,
}

impl SimilarityProfile {
    /// Wraps externally computed scores, checking the profile invariants.
    pub fn from_scores(forget_class: usize, scores: BTreeMap<usize, f64>) -> Result<Self> {
        if scores.contains_key(&forget_class) {
            return Err(Error::InvalidInput("forget class cannot carry a score".into()));
        }
        let total: f64 = scores.values().sum();
        if scores.values().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > crate::prob::MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("scores must be a distribution, sum {total}")));
        }
        Ok(SimilarityProfile {
            raw_similarity: BTreeMap::new(),
            scores,
            d_prime: 0,
            temperature: 1.0,
            forget_class,
        })
    }

    /// Dense score vector of length `k`; classes without a score get 0.
    pub fn score_vector(&self, k: usize) -> Vec<f64> {
        (0..k).map(|y| self.scores.get(&y).copied().unwrap_or(0.0)).collect()
    }

    /// Class with the highest score; ties go to the lowest id.
    pub fn most_similar(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (&c, &s) in &self.scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Scores every class other than `forget_class` (single-class forgetting).
pub fn similarity_scores(
    model: &ClassifierModel,
    forget_class: usize,
    d_prime: usize,
    temperature: f64,
) -> Result<SimilarityProfile> {
    similarity_scores_excluding(model, forget_class, &BTreeSet::new(), d_prime, temperature)
}

/// Scores the classes outside `exclude ∪ {forget_class}`.
///
/// PCA runs on the `K` final-layer weight vectors (centred by their mean);
/// each raw vector is projected onto the top `d_prime` principal directions
/// and compared to the forget class's projection by cosine similarity. The
/// cosines are passed through a softmax at `temperature`.
pub fn similarity_scores_excluding(
    model: &ClassifierModel,
    forget_class: usize,
    exclude: &BTreeSet<usize>,
    d_prime: usize,
    temperature: f64,
) -> Result<SimilarityProfile> {
    let w = model.logit_weights();
    let (k, d) = (w.rows(), w.cols());
    if forget_class >= k {
        return Err(Error::usage(format!("forget class {forget_class} >= {k}")));
    }
    if d_prime == 0 || d_prime > d.min(k) {
        return Err(Error::config(format!("d' must lie in [1, min(d={d}, K={k})], got {d_prime}")));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::config(format!("temperature must be > 0, got {temperature}")));
    }
    let retained: Vec<usize> = (0..k)
        .filter(|&y| y != forget_class && !exclude.contains(&y))
        .collect();
    if retained.is_empty() {
        return Err(Error::usage("no retained classes to score"));
    }

    let basis = principal_directions(w.as_slice(), k, d, d_prime);
    let project = |y: usize| -> Vec<f64> {
        let wy = w.row(y);
        basis
            .iter()
            .map(|u| u.iter().zip(wy).map(|(a, b)| a * b).sum())
            .collect()
    };
    let phi_f = project(forget_class);
    let norm_f = l2(&phi_f);
    if !(norm_f > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "forget class {forget_class} projects to the zero vector"
        )));
    }

    let mut raw_similarity = BTreeMap::new();
    for &y in &retained {
        let phi = project(y);
        let norm = l2(&phi);
        if !(norm > 0.0) {
            return Err(Error::DegenerateGeometry(format!("class {y} projects to the zero vector")));
        }
        let dot: f64 = phi.iter().zip(&phi_f).map(|(a, b)| a * b).sum();
        raw_similarity.insert(y, (dot / (norm * norm_f)).clamp(-1.0, 1.0));
    }
    let scaled: Vec<f64> = raw_similarity.values().map(|c| c / temperature).collect();
    let scores = retained.iter().copied().zip(softmax_vec(&scaled)).collect();
    Ok(SimilarityProfile {
        scores,
        raw_similarity,
        d_prime,
        temperature,
        forget_class,
    })
}

/// Scores from input-space geometry: the raw similarity of class `y` is
/// `1 / ||mu_y - mu_f||` for class means `mu` of `data`, followed by the same
/// softmax at `temperature`. `d_prime` is reported as 0.
pub fn centroid_similarity(
    data: &LabeledDataset,
    forget_class: usize,
    exclude: &BTreeSet<usize>,
    temperature: f64,
) -> Result<SimilarityProfile> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::config(format!("temperature must be > 0, got {temperature}")));
    }
    let (k, d) = (data.num_classes(), data.dim());
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (x, &y) in data.features.iter_rows().zip(&data.labels) {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(x) {
            *s += v;
        }
    }
    let mean = |y: usize| -> Result<Vec<f64>> {
        if counts[y] == 0 {
            return Err(Error::usage(format!("class {y} has no samples for a centroid")));
        }
        Ok(sums[y].iter().map(|s| s / counts[y] as f64).collect())
    };
    if forget_class >= k {
        return Err(Error::usage(format!("forget class {forget_class} >= {k}")));
    }
    let mu_f = mean(forget_class)?;
    let mut raw_similarity = BTreeMap::new();
    for y in (0..k).filter(|&y| y != forget_class && !exclude.contains(&y)) {
        let mu = mean(y)?;
        let dist = l2(&mu.iter().zip(&mu_f).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !(dist > 0.0) {
            return Err(Error::DegenerateGeometry(format!("classes {y} and {forget_class} share a centroid")));
        }
        raw_similarity.insert(y, 1.0 / dist);
    }
    if raw_similarity.is_empty() {
        return Err(Error::usage("no retained classes to score"));
    }
    let scaled: Vec<f64> = raw_similarity.values().map(|c| c / temperature).collect();
    let scores = raw_similarity.keys().copied().zip(softmax_vec(&scaled)).collect();
    Ok(SimilarityProfile {
        scores,
        raw_similarity,
        d_prime: 0,
        temperature,
        forget_class,
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Top `r` eigenvectors of the covariance of the `k` rows of `w` (`k x d`),
/// ordered by decreasing eigenvalue. Each vector is sign-normalised so its
/// largest-magnitude coordinate is positive.
fn principal_directions(w: &[f64], k: usize, d: usize, r: usize) -> Vec<Vec<f64>> {
    let mut mean = vec![0.0; d];
    for row in w.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in w.chunks_exact(d) {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in 0..d {
                cov[(i, j)] += ci * (row[j] - mean[j]);
            }
        }
    }
    cov /= k as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(r)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect()
}
