use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBlob {
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix (variances, not standard deviations).
    pub variance: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianMixtureSpec {
    pub per_class: Vec<ClassBlob>,
    pub seed: u64,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.per_class.first() else {
            return Err(Error::config("mixture needs at least one class"));
        };
        let d = first.mean.len();
        if d == 0 {
            return Err(Error::config("zero-dimensional mixture"));
        }
        for (c, blob) in self.per_class.iter().enumerate() {
            if blob.mean.len() != d || blob.variance.len() != d {
                return Err(Error::config(format!(
                    "class {c}: dimension mismatch (expected {d})"
                )));
            }
            if blob.variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::config(format!("class {c}: variances must be > 0")));
            }
            if blob.count == 0 {
                return Err(Error::config(format!("class {c}: count must be >= 1")));
            }
        }
        Ok(())
    }

    /// Same geometry and counts under a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        GaussianMixtureSpec {
            per_class: self.per_class.clone(),
            seed,
        }
    }

    /// Same geometry with every class count replaced.
    pub fn with_count(&self, count: usize) -> Self {
        GaussianMixtureSpec {
            per_class: self
                .per_class
                .iter()
                .map(|b| ClassBlob {
                    count,
                    ..b.clone()
                })
                .collect(),
            seed: self.seed,
        }
    }
}

/// Samples class 0's rows first, then class 1's, and so on. Each coordinate
/// is `mean + sqrt(variance) * z` with `z` standard normal from a ChaCha8
/// stream seeded by `spec.seed`.
pub fn gen_gaussian_mixture(spec: &GaussianMixtureSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let d = spec.per_class[0].mean.len();
    let n: usize = spec.per_class.iter().map(|b| b.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (c, blob) in spec.per_class.iter().enumerate() {
        let sd: Vec<f64> = blob.variance.iter().map(|v| v.sqrt()).collect();
        for _ in 0..blob.count {
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(blob.mean[j] + sd[j] * z);
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(
        Matrix::from_vec(n, d, data)?,
        labels,
        LabeledDataset::numeric_classes(spec.per_class.len()),
        "gaussian-mixture",
    )
}

fn blob(mean: [f64; 2], sd: f64, count: usize) -> ClassBlob {
    ClassBlob {
        mean: mean.to_vec(),
        variance: vec![sd * sd; 2],
        count,
    }
}

/// Three-class planar toy on a line: class 1 ("B") sits next to class 0
/// ("A") and far from class 2 ("C").
pub fn toy3_spec(count: usize, seed: u64) -> GaussianMixtureSpec {
    GaussianMixtureSpec {
        per_class: vec![
            blob([-3.0, 0.0], 0.5, count),
            blob([-1.5, 0.0], 0.5, count),
            blob([3.0, 0.0], 0.5, count),
        ],
        seed,
    }
}

/// Five classes on a ring, used for multi-class forgetting.
pub fn toy5_spec(count: usize, seed: u64) -> GaussianMixtureSpec {
    let per_class = (0..5)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / 5.0;
            blob([3.0 * angle.cos(), 3.0 * angle.sin()], 0.6, count)
        })
        .collect();
    GaussianMixtureSpec { per_class, seed }
}
