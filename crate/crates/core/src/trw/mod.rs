//! Tilted reweighting.
//!
//! For a forget class `f` and the original model's output `p(.|x)`:
//!
//! * reweighting removes `f` and renormalises: `p~(y) = p(y) / (1 - p(f))`;
//! * tilting biases `p~` toward classes similar to `f`:
//!   `q(y) ∝ p~(y) exp(beta * s_y)`, with `q(f) = 0`.
//!
//! `q` is the KL projection of `p` onto the retained simplex under the
//! moment constraint `sum_y q(y) s_y = c`; [`solve_beta`] recovers the `beta`
//! for a given `c` and [`iproj_oracle`] finds the projection by brute force.

mod oracle;
mod similarity;
mod tilt;

pub use oracle::{iproj_oracle, ORACLE_GRID_STEP};
pub use similarity::{centroid_similarity, similarity_scores, similarity_scores_excluding, SimilarityProfile};
pub use tilt::{
    build_forget_targets, moment, moment_variance, reweight, reweight_excluding, solve_beta,
    tilt, tilt_scores, trace_forget_targets, MomentConstraint, TiltConfig, TiltTrace,
    DEFAULT_BETA, DEGENERATE_MASS,
};

/// Default softmax temperature for similarity scores.
pub const DEFAULT_TEMPERATURE: f64 = 0.01;

/// Default PCA rank: `min(K, d, 16)`.
pub fn default_d_prime(num_classes: usize, feature_dim: usize) -> usize {
    num_classes.min(feature_dim).min(16)
}
