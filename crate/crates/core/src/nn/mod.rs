//! Feedforward softmax classifier with hand-written backpropagation.
//!
//! The loss accepts an arbitrary target distribution per sample, which is
//! what the tilted forget loss needs; one-hot targets reduce it to ordinary
//! cross-entropy.

mod codec;
mod model;
mod train;

pub use codec::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};
pub use model::{init_model, init_model_with, Activation, ClassifierModel, Dense};
pub use train::{
    eval_accuracy, loss_and_grad, predict, train_epochs, train_epochs_with, Gradients, StepRule,
    TrainConfig, TrainOutcome, PROB_FLOOR,
};
