use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SimilaritySource};
use super::results::{write_results_csv_path, Metrics, MetricsRow};
use super::seeds::{mix, Stream};
use crate::attacks::{basic_mia_score, class_acc, nearest_neighbor_from_tables, ulira_leave_one_out, LogitTable};
use crate::data::{split_forget, SplitDataset};
use crate::nn::{eval_accuracy, init_model_with, train_epochs, ClassifierModel, TrainConfig};
use crate::prob::ProbVector;
use crate::trw::{centroid_similarity, default_d_prime, SimilarityProfile};
use crate::unlearn::{profiles_for, retrain_oracle, run_method, UnlearnConfig};
use crate::{Error, Result};

/// Nearest-neighbour class chosen from the retrain models of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborInfo {
    pub seed: u64,
    pub forget_class: usize,
    pub nearest_neighbor: usize,
    pub per_class_mean_acc: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellError {
    pub method: String,
    pub seed: u64,
    pub message: String,
    pub divergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub errors: Vec<CellError>,
    pub neighbors: Vec<NeighborInfo>,
}

impl ExperimentOutput {
    /// True when there were cells and every one of them diverged.
    pub fn all_diverged(&self) -> bool {
        !self.rows.is_empty() && self.errors.len() == self.rows.len() && self.errors.iter().all(|e| e.divergence)
    }

    /// Successful rows of one method label.
    pub fn metrics_of(&self, method: &str) -> Vec<&Metrics> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.metrics.as_ref())
            .collect()
    }

    /// Writes `results.csv` and `results.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_results_csv_path(&dir.join("results.csv"), &self.rows)?;
        crate::io::write_json_atomic(&dir.join("results.json"), self)
    }
}

/// Everything shared by the cells of one experiment seed.
pub struct SeedContext {
    pub seed: u64,
    pub split: SplitDataset,
    pub original: ClassifierModel,
    pub retrain: Vec<ClassifierModel>,
    /// Extra originals for the unlearned arm of U-LiRA.
    pub shadow_originals: Vec<ClassifierModel>,
    pub profiles: BTreeMap<usize, SimilarityProfile>,
    shadow_profiles: Vec<BTreeMap<usize, SimilarityProfile>>,
    pub neighbors: BTreeMap<usize, (usize, BTreeMap<usize, f64>)>,
    retrain_tables: Vec<LogitTable>,
}

fn one_hot(labels: &[usize], k: usize) -> Vec<ProbVector> {
    labels.iter().map(|&l| ProbVector::one_hot(l, k)).collect()
}

impl SeedContext {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let (train, test) = cfg.dataset.load(seed)?;
        if train.dim() != cfg.architecture[0] || train.num_classes() != cfg.num_classes() {
            return Err(Error::config(format!(
                "architecture {:?} does not fit data with d={} and K={}",
                cfg.architecture,
                train.dim(),
                train.num_classes()
            )));
        }
        let split = split_forget(&train, &test, &cfg.forget_classes)?;
        let train_original = |j: u64| -> Result<ClassifierModel> {
            let init = init_model_with(&cfg.architecture, cfg.activation, mix(seed, Stream::OriginalInit, j))?;
            let tc = TrainConfig {
                seed: mix(seed, Stream::OriginalShuffle, j),
                ..cfg.train.clone()
            };
            Ok(train_epochs(&init, &train.features, &one_hot(&train.labels, train.num_classes()), &tc)?.model)
        };
        let original = train_original(0)?;
        let shadows = cfg.ulira_shadows.unwrap_or(0);
        let shadow_originals = (1..shadows as u64).map(train_original).collect::<Result<Vec<_>>>()?;
        let n_retrain = cfg.n_retrain_models.max(shadows);
        let retrain = (0..n_retrain as u64)
            .map(|j| {
                let tc = TrainConfig {
                    seed: mix(seed, Stream::RetrainShuffle, j),
                    ..cfg.train.clone()
                };
                retrain_oracle(
                    split.retain_view(),
                    &cfg.architecture,
                    cfg.activation,
                    mix(seed, Stream::RetrainInit, j),
                    &tc,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let d_prime = cfg
            .d_prime
            .unwrap_or_else(|| default_d_prime(cfg.num_classes(), original.logit_weights().cols()));
        let profiles_of = |m: &ClassifierModel| -> Result<BTreeMap<usize, SimilarityProfile>> {
            match cfg.similarity {
                SimilaritySource::Weights => profiles_for(m, &split.forget_classes, d_prime, cfg.temperature),
                SimilaritySource::Centroids => split
                    .forget_classes
                    .iter()
                    .map(|&f| {
                        centroid_similarity(&train, f, &split.forget_classes, cfg.temperature).map(|p| (f, p))
                    })
                    .collect(),
            }
        };
        let profiles = profiles_of(&original)?;
        let shadow_profiles = shadow_originals.iter().map(profiles_of).collect::<Result<Vec<_>>>()?;
        let retrain_tables = retrain
            .iter()
            .map(|m| LogitTable::from_split_test(m, &split))
            .collect::<Result<Vec<_>>>()?;
        let mut neighbors = BTreeMap::new();
        for &f in &split.forget_classes {
            let nn = nearest_neighbor_from_tables(&retrain_tables[..cfg.n_retrain_models], f, &split.forget_classes)?;
            neighbors.insert(f, nn);
        }
        Ok(SeedContext {
            seed,
            split,
            original,
            retrain,
            shadow_originals,
            profiles,
            shadow_profiles,
            neighbors,
            retrain_tables,
        })
    }

    fn retrain_train_config(&self, cfg: &ExperimentConfig) -> TrainConfig {
        TrainConfig {
            seed: mix(self.seed, Stream::RetrainShuffle, u64::MAX),
            ..cfg.train.clone()
        }
    }

    /// Runs one method on the original model with the method seed set to the
    /// experiment seed.
    pub fn unlearn(&self, cfg: &ExperimentConfig, method: &UnlearnConfig) -> Result<crate::unlearn::UnlearnResult> {
        self.unlearn_from(cfg, method, &self.original, &self.profiles, self.seed)
    }

    fn unlearn_from(
        &self,
        cfg: &ExperimentConfig,
        method: &UnlearnConfig,
        model: &ClassifierModel,
        profiles: &BTreeMap<usize, SimilarityProfile>,
        seed: u64,
    ) -> Result<crate::unlearn::UnlearnResult> {
        let mut ucfg = cfg.method_config(method);
        ucfg.seed = seed;
        run_method(model, &self.split, &ucfg, profiles, &self.retrain_train_config(cfg))
    }

    /// ACC_r, ACC_f, basic MIA and MIA-NN of `model`, as percentages.
    pub fn evaluate(&self, model: &ClassifierModel) -> Result<Metrics> {
        let split = &self.split;
        let rt = split.retain_test()?;
        let ft = split.forget_test()?;
        let table = LogitTable::from_split_test(model, split)?;
        let n = split.forget_classes.len() as f64;
        let (mut mia, mut nn, mut gap) = (0.0, 0.0, 0.0);
        for &f in &split.forget_classes {
            mia += basic_mia_score(model, split, f)?.score / n;
            let (rn, means) = &self.neighbors[&f];
            let acc = class_acc(&table, *rn, f, &split.forget_classes)?.acc;
            nn += 100.0 * acc / n;
            gap += 100.0 * (means[rn] - acc) / n;
        }
        Ok(Metrics {
            acc_r: 100.0 * eval_accuracy(model, &rt.features, &rt.labels)?,
            acc_f: 100.0 * eval_accuracy(model, &ft.features, &ft.labels)?,
            mia,
            mia_nn: nn,
            mia_nn_gap: gap,
            ulira: None,
            runtime_seconds: 0.0,
        })
    }

    /// U-LiRA accuracy (percent) of `method`: the unlearned arm applies it
    /// to the original and the shadow originals, the retrain arm uses the
    /// first retrain models.
    pub fn ulira(&self, cfg: &ExperimentConfig, method: &UnlearnConfig, first: &ClassifierModel) -> Result<f64> {
        let shadows = self.shadow_originals.len() + 1;
        let mut unlearned = vec![first.clone()];
        for (j, (m, p)) in self.shadow_originals.iter().zip(&self.shadow_profiles).enumerate() {
            let seed = mix(self.seed, Stream::Shadow, j as u64);
            unlearned.push(self.unlearn_from(cfg, method, m, p, seed)?.model);
        }
        let forget_tables = |models: &[ClassifierModel], f: usize| -> Result<Vec<LogitTable>> {
            let data = self.split.forget_test_of(f)?;
            models.iter().map(|m| LogitTable::from_model(m, data, "")).collect()
        };
        let n = self.split.forget_classes.len() as f64;
        let mut total = 0.0;
        for &f in &self.split.forget_classes {
            let u = forget_tables(&unlearned, f)?;
            let r = forget_tables(&self.retrain[..shadows], f)?;
            total += 100.0 * ulira_leave_one_out(&u, &r, f, &self.split.forget_classes)? / n;
        }
        Ok(total)
    }

    /// Logits of every retrain model on the test split.
    pub fn retrain_tables(&self) -> &[LogitTable] {
        &self.retrain_tables
    }

    pub fn run_cell(&self, cfg: &ExperimentConfig, method: &UnlearnConfig) -> Result<Metrics> {
        let start = Instant::now();
        let out = self.unlearn(cfg, method)?;
        let elapsed = start.elapsed().as_secs_f64();
        let mut metrics = self.evaluate(&out.model)?;
        if cfg.ulira_shadows.is_some() {
            metrics.ulira = Some(self.ulira(cfg, method, &out.model)?);
        }
        if cfg.record_timing {
            metrics.runtime_seconds = elapsed;
        }
        Ok(metrics)
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

/// Runs `methods` for every seed of `cfg`. Failed cells become error rows.
pub fn run_methods(cfg: &ExperimentConfig, methods: &[UnlearnConfig], jobs: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::config("methods must not be empty"));
    }
    for m in methods {
        cfg.method_config(m).validate()?;
    }
    pool(jobs)?.install(|| {
        let mut contexts: Vec<Result<SeedContext>> =
            cfg.seeds.par_iter().map(|&s| SeedContext::build(cfg, s)).collect();
        // Data and config problems are not per-cell failures.
        let fatal = |c: &Result<SeedContext>| {
            matches!(c, Err(Error::Config(_) | Error::Io(_) | Error::Format { .. } | Error::Json(_) | Error::Csv(_)))
        };
        if let Some(i) = contexts.iter().position(fatal) {
            return Err(contexts.swap_remove(i).err().expect("matched an error"));
        }
        let cells: Vec<(usize, usize)> = (0..methods.len())
            .flat_map(|m| (0..cfg.seeds.len()).map(move |s| (m, s)))
            .collect();
        let results: Vec<Result<Metrics>> = cells
            .par_iter()
            .map(|&(m, s)| match &contexts[s] {
                Ok(ctx) => ctx.run_cell(cfg, &methods[m]),
                Err(e) => Err(clone_error(e)),
            })
            .collect();
        let mut out = ExperimentOutput {
            rows: Vec::new(),
            errors: Vec::new(),
            neighbors: Vec::new(),
        };
        for ctx in contexts.iter().flatten() {
            for (&f, (rn, means)) in &ctx.neighbors {
                out.neighbors.push(NeighborInfo {
                    seed: ctx.seed,
                    forget_class: f,
                    nearest_neighbor: *rn,
                    per_class_mean_acc: means.clone(),
                });
            }
        }
        for (&(m, s), res) in cells.iter().zip(results) {
            let label = methods[m].label();
            let seed = cfg.seeds[s];
            let metrics = match res {
                Ok(metrics) => Some(metrics),
                Err(e) => {
                    out.errors.push(CellError {
                        method: label.clone(),
                        seed,
                        divergence: matches!(e, Error::Divergence { .. }),
                        message: e.to_string(),
                    });
                    None
                }
            };
            out.rows.push(MetricsRow {
                method: label,
                seed,
                metrics,
            });
        }
        Ok(out)
    })
}

// `Error` holds non-clonable sources; cells only need the rendered message
// and the variant for the divergence flag.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Divergence { epoch } => Error::Divergence { epoch: *epoch },
        Error::Config(m) => Error::Config(m.clone()),
        Error::Format { offset, message } => Error::Format {
            offset: *offset,
            message: message.clone(),
        },
        other => Error::InvalidInput(other.to_string()),
    }
}

/// Runs the configured methods and writes the tables to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    let out = run_methods(cfg, &cfg.methods, jobs)?;
    out.write(&cfg.output_dir)?;
    Ok(out)
}

/// One TRW run per beta (template: the first TRW method of `cfg`).
pub fn ablate_beta(cfg: &ExperimentConfig, betas: &[f64], jobs: Option<usize>) -> Result<ExperimentOutput> {
    if betas.is_empty() {
        return Err(Error::config("betas must not be empty"));
    }
    let template = cfg.trw_template();
    let methods: Vec<UnlearnConfig> = betas
        .iter()
        .map(|&b| UnlearnConfig {
            beta: Some(b),
            label: Some(format!("trw[beta={b}]")),
            ..template.clone()
        })
        .collect();
    let out = run_methods(cfg, &methods, jobs)?;
    out.write(&cfg.output_dir)?;
    Ok(out)
}

/// Nested forget sets of sizes `1..=max`, from a seeded class permutation.
pub fn nested_forget_sets(num_classes: usize, max: usize, seed: u64) -> Result<Vec<BTreeSet<usize>>> {
    if max == 0 || max + 2 > num_classes {
        return Err(Error::config(format!(
            "forgetting {max} of {num_classes} classes leaves fewer than two retained"
        )));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(mix(seed, Stream::Multiclass, 0)));
    Ok((1..=max).map(|n| order[..n].iter().copied().collect()).collect())
}

/// TRW for each forget set; rows are labelled `trw[forget=a+b]`.
pub fn run_multiclass(
    cfg: &ExperimentConfig,
    sets: &[BTreeSet<usize>],
    jobs: Option<usize>,
) -> Result<ExperimentOutput> {
    let template = cfg.trw_template();
    let mut all = ExperimentOutput {
        rows: Vec::new(),
        errors: Vec::new(),
        neighbors: Vec::new(),
    };
    for set in sets {
        let tag = set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+");
        let sub = ExperimentConfig {
            forget_classes: set.clone(),
            ..cfg.clone()
        };
        let method = UnlearnConfig {
            label: Some(format!("trw[forget={tag}]")),
            ..template.clone()
        };
        let out = run_methods(&sub, &[method], jobs)?;
        all.rows.extend(out.rows);
        all.errors.extend(out.errors);
        all.neighbors.extend(out.neighbors);
    }
    all.write(&cfg.output_dir)?;
    Ok(all)
}
