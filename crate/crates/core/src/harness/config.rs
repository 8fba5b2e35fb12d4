use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    gen_gaussian_mixture, load_idx, toy3_spec, toy5_spec, GaussianMixtureSpec, LabeledDataset,
};
use crate::nn::{Activation, TrainConfig};
use crate::trw::{DEFAULT_BETA, DEFAULT_TEMPERATURE};
use crate::unlearn::{Method, UnlearnConfig};
use crate::{Error, Result};

use super::seeds::{mix, Stream};

fn default_train_per_class() -> usize {
    200
}

fn default_test_per_class() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Three planar Gaussians with class 1 placed next to class 0.
    Toy3 {
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
    },
    /// Five planar Gaussians on a ring.
    Toy5 {
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
    },
    /// An inline mixture; its counts size the training set.
    Gaussian {
        spec: GaussianMixtureSpec,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
    },
    /// A JSON `GaussianMixtureSpec` on disk.
    GaussianSpecFile {
        path: PathBuf,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
    },
    /// A directory with the four standard IDX files (optionally gzipped).
    MnistIdx {
        dir: PathBuf,
        #[serde(default)]
        train_per_class: Option<usize>,
        #[serde(default)]
        test_per_class: Option<usize>,
    },
}

fn find_idx(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{stem} not found in {}", dir.display()),
    )))
}

impl DatasetConfig {
    /// Train and test sets. Synthetic data is redrawn for every experiment seed.
    pub fn load(&self, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        let gen = |spec: &GaussianMixtureSpec, test_count: usize| -> Result<(LabeledDataset, LabeledDataset)> {
            let train = gen_gaussian_mixture(&spec.with_seed(mix(spec.seed ^ seed, Stream::DataTrain, 0)))?;
            let test = gen_gaussian_mixture(
                &spec
                    .with_count(test_count)
                    .with_seed(mix(spec.seed ^ seed, Stream::DataTest, 0)),
            )?;
            Ok((train, test))
        };
        match self {
            DatasetConfig::Toy3 {
                train_per_class,
                test_per_class,
            } => gen(&toy3_spec(*train_per_class, 0), *test_per_class),
            DatasetConfig::Toy5 {
                train_per_class,
                test_per_class,
            } => gen(&toy5_spec(*train_per_class, 0), *test_per_class),
            DatasetConfig::Gaussian { spec, test_per_class } => {
                spec.validate()?;
                gen(spec, *test_per_class)
            }
            DatasetConfig::GaussianSpecFile { path, test_per_class } => {
                let spec: GaussianMixtureSpec = serde_json::from_slice(&std::fs::read(path)?)?;
                spec.validate()?;
                gen(&spec, *test_per_class)
            }
            DatasetConfig::MnistIdx {
                dir,
                train_per_class,
                test_per_class,
            } => {
                let mut train = load_idx(
                    &find_idx(dir, "train-images-idx3-ubyte")?,
                    &find_idx(dir, "train-labels-idx1-ubyte")?,
                )?;
                let mut test = load_idx(
                    &find_idx(dir, "t10k-images-idx3-ubyte")?,
                    &find_idx(dir, "t10k-labels-idx1-ubyte")?,
                )?;
                if let Some(n) = train_per_class {
                    train = train.take_per_class(*n);
                }
                if let Some(n) = test_per_class {
                    test = test.take_per_class(*n);
                }
                Ok((train, test))
            }
        }
    }
}

/// Decision-region grid for planar data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    /// `[xmin, xmax, ymin, ymax]`; defaults to the data extent plus `margin`.
    pub bounds: Option<[f64; 4]>,
    pub margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: 100,
            bounds: None,
            margin: 1.0,
        }
    }
}

/// Where TRW similarity scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SimilaritySource {
    /// PCA-projected final-layer weights of the original model.
    #[default]
    Weights,
    /// Inverse distances between class means of the training data.
    Centroids,
}

fn default_n_retrain() -> usize {
    3
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Layer widths, input first, classes last.
    pub architecture: Vec<usize>,
    pub forget_classes: BTreeSet<usize>,
    pub methods: Vec<UnlearnConfig>,
    #[serde(default = "default_n_retrain")]
    pub n_retrain_models: usize,
    /// Tilt strength used by TRW methods that leave `beta` unset.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Training of the original and retrain models.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub similarity: SimilaritySource,
    #[serde(default)]
    pub d_prime: Option<usize>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Models per arm for U-LiRA; the column stays empty when unset.
    #[serde(default)]
    pub ulira_shadows: Option<usize>,
    /// Wall-clock times make outputs differ between runs, so they are
    /// recorded only on request.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub grid: GridConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods must not be empty"));
        }
        if self.n_retrain_models == 0 {
            return Err(Error::config("nRetrainModels must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if self.architecture.len() < 2 || self.architecture.contains(&0) {
            return Err(Error::config("architecture needs at least two nonzero widths"));
        }
        let k = *self.architecture.last().unwrap_or(&0);
        if self.forget_classes.is_empty() {
            return Err(Error::config("forgetClasses must not be empty"));
        }
        if let Some(&bad) = self.forget_classes.iter().find(|&&c| c >= k) {
            return Err(Error::config(format!("forget class {bad} out of range for {k} classes")));
        }
        if k < self.forget_classes.len() + 2 {
            return Err(Error::config("at least two classes must be retained"));
        }
        if !self.beta.is_finite() || !(self.temperature > 0.0) {
            return Err(Error::config("beta must be finite and temperature positive"));
        }
        if let Some(s) = self.ulira_shadows {
            if s < 3 {
                return Err(Error::config("uliraShadows must be >= 3"));
            }
        }
        if self.d_prime == Some(0) || self.grid.resolution == 0 {
            return Err(Error::config("dPrime and grid resolution must be positive"));
        }
        self.train.validate()?;
        for m in &self.methods {
            self.method_config(m).validate()?;
        }
        Ok(())
    }

    /// `m` with the experiment beta filled in.
    pub fn method_config(&self, m: &UnlearnConfig) -> UnlearnConfig {
        let mut m = m.clone();
        if m.beta.is_none() && m.method.uses_tilt() {
            m.beta = Some(self.beta);
        }
        m
    }

    /// The first TRW entry of `methods`, or a short default run.
    pub fn trw_template(&self) -> UnlearnConfig {
        let base = self
            .methods
            .iter()
            .find(|m| m.method == Method::Trw)
            .cloned()
            .unwrap_or_else(|| UnlearnConfig::new(Method::Trw, 5, 0.05));
        self.method_config(&base)
    }

    pub fn num_classes(&self) -> usize {
        *self.architecture.last().unwrap_or(&0)
    }
}
