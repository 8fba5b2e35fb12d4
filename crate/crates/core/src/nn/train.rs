use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ClassifierModel;
use crate::matrix::Matrix;
use crate::prob::{argmax, softmax_vec, ProbVector};
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1]` before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Parameter-shaped gradient: one `(weights, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &ClassifierModel) -> Self {
        Gradients {
            layers: model
                .layers()
                .iter()
                .map(|l| (Matrix::zeros(l.outputs(), l.inputs()), vec![0.0; l.outputs()]))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for (w, b) in &self.layers {
            for v in w.as_slice().iter().chain(b) {
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            for v in w.as_mut_slice().iter_mut().chain(b.iter_mut()) {
                *v *= factor;
            }
        }
    }
}

/// Mean generalised cross-entropy `-sum_y q(y) log p(y|x)` over the batch and
/// its gradient with respect to every parameter.
pub fn loss_and_grad(
    model: &ClassifierModel,
    inputs: &[&[f64]],
    targets: &[&ProbVector],
) -> Result<(f64, Gradients)> {
    if inputs.is_empty() {
        return Err(Error::usage("empty batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::usage(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let k = model.num_classes();
    let d = model.input_dim();
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != d {
            return Err(Error::Shape {
                expected: d,
                actual: x.len(),
            });
        }
        if t.len() != k {
            return Err(Error::Shape {
                expected: k,
                actual: t.len(),
            });
        }
    }

    let layers = model.layers();
    let last = layers.len() - 1;
    let act = model.activation();
    let mut grads = Gradients::zeros_like(model);
    let mut total_loss = 0.0;

    // pre[l] is the pre-activation of layer l; post[l] is the input to layer l.
    let mut pre: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
    let mut post: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.inputs()]).collect();

    for (x, target) in inputs.iter().zip(targets) {
        post[0].copy_from_slice(x);
        for l in 0..layers.len() {
            layers[l].affine(&post[l], &mut pre[l]);
            if l < last {
                for (dst, &z) in post[l + 1].iter_mut().zip(&pre[l]) {
                    *dst = act.apply(z);
                }
            }
        }

        let p = softmax_vec(&pre[last]);
        let mut live_mass = 0.0;
        let mut delta = vec![0.0; k];
        for y in 0..k {
            let q = target.get(y);
            if q == 0.0 {
                continue;
            }
            if p[y] >= PROB_FLOOR {
                total_loss -= q * p[y].ln();
                live_mass += q;
                delta[y] -= q;
            } else {
                // Clamped entries contribute a constant and no gradient.
                total_loss -= q * PROB_FLOOR.ln();
            }
        }
        for (dz, &py) in delta.iter_mut().zip(&p) {
            *dz += py * live_mass;
        }

        for l in (0..layers.len()).rev() {
            let (gw, gb) = &mut grads.layers[l];
            let input = &post[l];
            for (i, &dz) in delta.iter().enumerate() {
                gb[i] += dz;
                if dz != 0.0 {
                    for (g, &a) in gw.row_mut(i).iter_mut().zip(input) {
                        *g += dz * a;
                    }
                }
            }
            if l > 0 {
                let w = &layers[l].weights;
                let mut prev = vec![0.0; w.cols()];
                for (i, &dz) in delta.iter().enumerate() {
                    if dz != 0.0 {
                        for (pv, &wij) in prev.iter_mut().zip(w.row(i)) {
                            *pv += dz * wij;
                        }
                    }
                }
                for (pv, &z) in prev.iter_mut().zip(&pre[l - 1]) {
                    *pv *= act.derivative(z);
                }
                delta = prev;
            }
        }
    }

    let n = inputs.len() as f64;
    grads.scale(1.0 / n);
    Ok((total_loss / n, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so that "no-op" runs can be expressed.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// How a computed gradient turns into a parameter update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRule {
    /// Step up the loss instead of down.
    pub ascend: bool,
    /// Rescale the gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    /// Per-layer update mask; `None` trains every layer.
    pub trainable: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    /// Sample-weighted mean batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD on `features` with per-row target distributions.
pub fn train_epochs(
    model: &ClassifierModel,
    features: &Matrix,
    targets: &[ProbVector],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_epochs_with(model, features, targets, cfg, &StepRule::default())
}

pub fn train_epochs_with(
    model: &ClassifierModel,
    features: &Matrix,
    targets: &[ProbVector],
    cfg: &TrainConfig,
    rule: &StepRule,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if features.rows() != targets.len() {
        return Err(Error::usage(format!(
            "{} rows but {} targets",
            features.rows(),
            targets.len()
        )));
    }
    if features.rows() == 0 {
        return Err(Error::usage("empty training set"));
    }
    if let Some(mask) = &rule.trainable {
        if mask.len() != model.layers().len() {
            return Err(Error::config("trainable mask length must equal layer count"));
        }
    }

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..features.rows()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let sign = if rule.ascend { 1.0 } else { -1.0 };

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| features.row(i)).collect();
            let ts: Vec<&ProbVector> = chunk.iter().map(|&i| &targets[i]).collect();
            let (loss, mut grads) = loss_and_grad(&model, &xs, &ts)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            weighted += loss * chunk.len() as f64;
            if let Some(max_norm) = rule.clip_norm {
                let norm = grads.norm();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            apply_step(&mut model, &grads, sign * cfg.learning_rate, rule.trainable.as_deref());
        }
        let epoch_loss = weighted / features.rows() as f64;
        if !epoch_loss.is_finite() || !model.flat_params().iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

fn apply_step(model: &mut ClassifierModel, grads: &Gradients, step: f64, mask: Option<&[bool]>) {
    for (l, (layer, (gw, gb))) in model.layers_mut().iter_mut().zip(&grads.layers).enumerate() {
        if mask.is_some_and(|m| !m[l]) {
            continue;
        }
        for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w += step * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(gb) {
            *b += step * g;
        }
    }
}

/// Argmax class per row; ties go to the lowest class index.
pub fn predict(model: &ClassifierModel, features: &Matrix) -> Result<Vec<usize>> {
    features
        .iter_rows()
        .map(|x| model.forward(x).map(|z| argmax(&z)))
        .collect()
}

/// Fraction of rows whose argmax prediction equals the label.
pub fn eval_accuracy(model: &ClassifierModel, features: &Matrix, labels: &[usize]) -> Result<f64> {
    if features.rows() == 0 {
        return Err(Error::usage("accuracy of an empty subset"));
    }
    if features.rows() != labels.len() {
        return Err(Error::usage("features and labels differ in length"));
    }
    let preds = predict(model, features)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}
