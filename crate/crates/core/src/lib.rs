//! Desk-scale laboratory for class unlearning.
//!
//! * [`nn`]: softmax MLP with manual gradients and a flat binary format.
//! * [`data`]: Gaussian toys, IDX loading, forget/retain splits.
//! * [`trw`]: reweighting, similarity scores, exponential tilting, the
//!   moment solver and a brute-force projection oracle.
//! * [`unlearn`]: retrain, fine-tune, random labels, gradient ascent, TRW and
//!   its two-layer variant.
//! * [`attacks`]: nearest-neighbour MIA, a confidence MIA and a shadow-model
//!   likelihood-ratio attack.
//! * [`harness`]: end-to-end experiments, sweeps and report emission.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod data;
mod error;
pub mod harness;
pub mod io;
mod matrix;
pub mod nn;
mod prob;
pub mod trw;
pub mod unlearn;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use prob::{argmax, kl_divergence, softmax, ProbVector, MASS_TOLERANCE};
