//! Unlearning procedures: the retrain gold standard and the fine-tuning
//! style methods compared against it.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{RetainView, SplitDataset};
use crate::matrix::Matrix;
use crate::nn::{init_model_with, train_epochs, train_epochs_with, Activation, ClassifierModel, StepRule, TrainConfig};
use crate::prob::ProbVector;
use crate::trw::{trace_forget_targets, SimilarityProfile, TiltConfig, DEFAULT_BETA};
use crate::{Error, Result};

/// Gradient-norm cap used by gradient ascent.
pub const GA_CLIP_NORM: f64 = 1.0;

const RELABEL_STREAM: u64 = 0x005E_ED0F_7E1A_BE15;
const LAYER_STREAM: u64 = 0x001A_7E50_B5E7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The unchanged original model, reported for reference.
    #[serde(alias = "original-passthrough")]
    Original,
    Retrain,
    Ft,
    Rl,
    Ga,
    Trw,
    Trw2r,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Retrain => "retrain",
            Method::Ft => "ft",
            Method::Rl => "rl",
            Method::Ga => "ga",
            Method::Trw => "trw",
            Method::Trw2r => "trw2r",
        }
    }

    pub fn uses_tilt(self) -> bool {
        matches!(self, Method::Trw | Method::Trw2r)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" | "original-passthrough" => Method::Original,
            "retrain" => Method::Retrain,
            "ft" => Method::Ft,
            "rl" => Method::Rl,
            "ga" => Method::Ga,
            "trw" => Method::Trw,
            "trw2r" => Method::Trw2r,
            other => return Err(Error::config(format!("unknown method {other:?}"))),
        })
    }
}

fn default_layer_subset() -> usize {
    2
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnlearnConfig {
    pub method: Method,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Tilt strength for TRW methods; unset means the experiment default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_layer_subset")]
    pub layer_subset_size: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Row label in result tables; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl UnlearnConfig {
    pub fn new(method: Method, epochs: usize, learning_rate: f64) -> Self {
        UnlearnConfig {
            method,
            epochs,
            learning_rate,
            beta: None,
            seed: 0,
            layer_subset_size: default_layer_subset(),
            batch_size: default_batch(),
            label: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.method.uses_tilt() && !self.beta().is_finite() {
            return Err(Error::config("beta must be finite"));
        }
        if self.method == Method::Trw2r && self.layer_subset_size == 0 {
            return Err(Error::config("layer subset must contain at least one layer"));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(DEFAULT_BETA)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.name().to_string())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnlearnResult {
    pub model: ClassifierModel,
    pub wall_clock_seconds: f64,
    pub epoch_losses: Vec<f64>,
    pub method: Method,
}

/// JSON sidecar stored next to an unlearned model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnlearnSidecar {
    pub method: Method,
    pub config: UnlearnConfig,
    pub epoch_losses: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub architecture: Vec<usize>,
    pub activation: Activation,
}

impl UnlearnResult {
    pub fn sidecar(&self, config: &UnlearnConfig) -> UnlearnSidecar {
        UnlearnSidecar {
            method: self.method,
            config: config.clone(),
            epoch_losses: self.epoch_losses.clone(),
            wall_clock_seconds: self.wall_clock_seconds,
            architecture: self.model.architecture(),
            activation: self.model.activation(),
        }
    }
}

fn one_hot_targets(labels: &[usize], k: usize) -> Vec<ProbVector> {
    labels.iter().map(|&l| ProbVector::one_hot(l, k)).collect()
}

/// Trains a fresh model on the retained data only.
pub fn retrain_oracle(
    view: RetainView<'_>,
    arch: &[usize],
    activation: Activation,
    init_seed: u64,
    train: &TrainConfig,
) -> Result<ClassifierModel> {
    let data = view.retain_train;
    if data.is_empty() {
        return Err(Error::usage("retain set is empty"));
    }
    let model = init_model_with(arch, activation, init_seed)?;
    if model.input_dim() != data.dim() || model.num_classes() != data.num_classes() {
        return Err(Error::config(format!(
            "architecture {arch:?} does not fit data with d={} and K={}",
            data.dim(),
            data.num_classes()
        )));
    }
    let targets = one_hot_targets(&data.labels, data.num_classes());
    Ok(train_epochs(&model, &data.features, &targets, train)?.model)
}

fn timed(method: Method, run: impl FnOnce() -> Result<crate::nn::TrainOutcome>) -> Result<UnlearnResult> {
    let start = Instant::now();
    let out = run()?;
    Ok(UnlearnResult {
        model: out.model,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        epoch_losses: out.epoch_losses,
        method,
    })
}

/// Fine-tunes on the retain set with one-hot targets.
pub fn unlearn_ft(model: &ClassifierModel, split: &SplitDataset, cfg: &UnlearnConfig) -> Result<UnlearnResult> {
    cfg.validate()?;
    let data = &split.retain_train;
    let targets = one_hot_targets(&data.labels, data.num_classes());
    timed(Method::Ft, || train_epochs(model, &data.features, &targets, &cfg.train_config()))
}

/// Uniform labels from `retained` for `n` forget samples, drawn once.
pub fn random_relabel(n: usize, retained: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RELABEL_STREAM);
    (0..n).map(|_| retained[rng.random_range(0..retained.len())]).collect()
}

/// Fine-tunes on the retain set together with randomly relabelled forget data.
pub fn unlearn_rl(model: &ClassifierModel, split: &SplitDataset, cfg: &UnlearnConfig) -> Result<UnlearnResult> {
    cfg.validate()?;
    let k = split.num_classes();
    let relabels = random_relabel(split.forget_train.len(), &split.retained_classes(), cfg.seed);
    let features = split.retain_train.features.vstack(&split.forget_train.features)?;
    let mut targets = one_hot_targets(&split.retain_train.labels, k);
    targets.extend(one_hot_targets(&relabels, k));
    timed(Method::Rl, || train_epochs(model, &features, &targets, &cfg.train_config()))
}

/// Gradient ascent on the forget-set cross-entropy with norm clipping.
pub fn unlearn_ga(model: &ClassifierModel, split: &SplitDataset, cfg: &UnlearnConfig) -> Result<UnlearnResult> {
    cfg.validate()?;
    let data = &split.forget_train;
    let targets = one_hot_targets(&data.labels, data.num_classes());
    let rule = StepRule {
        ascend: true,
        clip_norm: Some(GA_CLIP_NORM),
        trainable: None,
    };
    timed(Method::Ga, || train_epochs_with(model, &data.features, &targets, &cfg.train_config(), &rule))
}

/// Training set of the TRW objective: retained rows with one-hot targets
/// followed by forget rows with tilted targets. Targets come from `model`
/// once and do not change during training.
pub fn trw_training_set(
    model: &ClassifierModel,
    split: &SplitDataset,
    profiles: &BTreeMap<usize, SimilarityProfile>,
    beta: f64,
) -> Result<(Matrix, Vec<ProbVector>)> {
    let k = split.num_classes();
    let mut features = split.retain_train.features.clone();
    let mut targets = one_hot_targets(&split.retain_train.labels, k);
    for &f in &split.forget_classes {
        let profile = profiles
            .get(&f)
            .ok_or_else(|| Error::usage(format!("no similarity profile for forget class {f}")))?;
        let rows: Vec<usize> = (0..split.forget_train.len())
            .filter(|&i| split.forget_train.labels[i] == f)
            .collect();
        let samples = split.forget_train.features.select_rows(&rows);
        let traces = trace_forget_targets(model, &samples, &split.forget_classes, profile, TiltConfig { beta })?;
        features = features.vstack(&samples)?;
        targets.extend(traces.into_iter().map(|t| t.q));
    }
    Ok((features, targets))
}

fn single_profile(split: &SplitDataset, scores: &SimilarityProfile) -> Result<BTreeMap<usize, SimilarityProfile>> {
    if !split.forget_classes.contains(&scores.forget_class) || split.forget_classes.len() != 1 {
        return Err(Error::usage(
            "single-profile TRW needs exactly one forget class matching the profile",
        ));
    }
    Ok(BTreeMap::from([(scores.forget_class, scores.clone())]))
}

/// Tilted reweighting: one-hot loss on retained data plus cross-entropy
/// toward frozen tilted targets on forget data.
pub fn unlearn_trw(
    model: &ClassifierModel,
    split: &SplitDataset,
    cfg: &UnlearnConfig,
    scores: &SimilarityProfile,
) -> Result<UnlearnResult> {
    unlearn_trw_multi(model, split, cfg, &single_profile(split, scores)?)
}

/// TRW with one similarity profile per forget class.
pub fn unlearn_trw_multi(
    model: &ClassifierModel,
    split: &SplitDataset,
    cfg: &UnlearnConfig,
    profiles: &BTreeMap<usize, SimilarityProfile>,
) -> Result<UnlearnResult> {
    cfg.validate()?;
    let (features, targets) = trw_training_set(model, split, profiles, cfg.beta())?;
    timed(Method::Trw, || train_epochs(model, &features, &targets, &cfg.train_config()))
}

/// The layers TRW-2R updates: `size` distinct indices drawn once per run.
pub fn choose_layers(num_layers: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || size > num_layers {
        return Err(Error::config(format!(
            "layer subset size {size} must lie in [1, {num_layers}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ LAYER_STREAM);
    let mut chosen = sample(&mut rng, num_layers, size).into_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// TRW restricted to a random subset of layers; the rest stay frozen.
pub fn unlearn_trw2r(
    model: &ClassifierModel,
    split: &SplitDataset,
    cfg: &UnlearnConfig,
    scores: &SimilarityProfile,
) -> Result<UnlearnResult> {
    cfg.validate()?;
    let chosen = choose_layers(model.layers().len(), cfg.layer_subset_size, cfg.seed)?;
    let mask: Vec<bool> = (0..model.layers().len()).map(|l| chosen.contains(&l)).collect();
    let (features, targets) = trw_training_set(model, split, &single_profile(split, scores)?, cfg.beta())?;
    let rule = StepRule {
        trainable: Some(mask),
        ..StepRule::default()
    };
    let mut result = timed(Method::Trw2r, || {
        train_epochs_with(model, &features, &targets, &cfg.train_config(), &rule)
    })?;
    result.method = Method::Trw2r;
    Ok(result)
}

/// Dispatches on `cfg.method`. Retrain builds a fresh model of the same
/// architecture seeded with `cfg.seed`; `profiles` is needed for TRW methods.
pub fn run_method(
    model: &ClassifierModel,
    split: &SplitDataset,
    cfg: &UnlearnConfig,
    profiles: &BTreeMap<usize, SimilarityProfile>,
    retrain: &TrainConfig,
) -> Result<UnlearnResult> {
    let profile_for_single = || -> Result<&SimilarityProfile> {
        let f = split
            .forget_classes
            .iter()
            .next()
            .ok_or_else(|| Error::usage("no forget class"))?;
        profiles
            .get(f)
            .ok_or_else(|| Error::usage(format!("no similarity profile for class {f}")))
    };
    match cfg.method {
        Method::Original => Ok(UnlearnResult {
            model: model.clone(),
            wall_clock_seconds: 0.0,
            epoch_losses: Vec::new(),
            method: Method::Original,
        }),
        Method::Retrain => {
            let start = Instant::now();
            let m = retrain_oracle(split.retain_view(), &model.architecture(), model.activation(), cfg.seed, retrain)?;
            Ok(UnlearnResult {
                model: m,
                wall_clock_seconds: start.elapsed().as_secs_f64(),
                epoch_losses: Vec::new(),
                method: Method::Retrain,
            })
        }
        Method::Ft => unlearn_ft(model, split, cfg),
        Method::Rl => unlearn_rl(model, split, cfg),
        Method::Ga => unlearn_ga(model, split, cfg),
        Method::Trw if split.forget_classes.len() > 1 => unlearn_trw_multi(model, split, cfg, profiles),
        Method::Trw => unlearn_trw(model, split, cfg, profile_for_single()?),
        Method::Trw2r => unlearn_trw2r(model, split, cfg, profile_for_single()?),
    }
}

/// Forget classes → profile map, one profile per class from the same model.
pub fn profiles_for(
    model: &ClassifierModel,
    forget: &BTreeSet<usize>,
    d_prime: usize,
    temperature: f64,
) -> Result<BTreeMap<usize, SimilarityProfile>> {
    forget
        .iter()
        .map(|&f| {
            crate::trw::similarity_scores_excluding(model, f, forget, d_prime, temperature).map(|p| (f, p))
        })
        .collect()
}
