use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GridConfig};
use super::experiment::SeedContext;
use crate::data::LabeledDataset;
use crate::nn::ClassifierModel;
use crate::unlearn::UnlearnConfig;
use crate::{Error, Result};

/// Cell centres of an `r x r` grid, x varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Grid {
    pub resolution: usize,
    pub bounds: [f64; 4],
    #[serde(skip)]
    pub points: Vec<[f64; 2]>,
}

impl Grid {
    pub fn new(resolution: usize, bounds: [f64; 4]) -> Result<Self> {
        let [x0, x1, y0, y1] = bounds;
        if resolution == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::config("grid needs positive resolution and nonempty bounds"));
        }
        let r = resolution as f64;
        let points = (0..resolution)
            .flat_map(|j| {
                (0..resolution).map(move |i| {
                    [
                        x0 + (i as f64 + 0.5) * (x1 - x0) / r,
                        y0 + (j as f64 + 0.5) * (y1 - y0) / r,
                    ]
                })
            })
            .collect();
        Ok(Grid {
            resolution,
            bounds,
            points,
        })
    }

    pub fn covering(cfg: &GridConfig, data: &LabeledDataset) -> Result<Self> {
        if data.dim() != 2 {
            return Err(Error::usage(format!("decision grids need 2-D data, got d={}", data.dim())));
        }
        let bounds = cfg.bounds.unwrap_or_else(|| {
            let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for row in data.features.iter_rows() {
                b[0] = b[0].min(row[0]);
                b[1] = b[1].max(row[0]);
                b[2] = b[2].min(row[1]);
                b[3] = b[3].max(row[1]);
            }
            [b[0] - cfg.margin, b[1] + cfg.margin, b[2] - cfg.margin, b[3] + cfg.margin]
        });
        Grid::new(cfg.resolution, bounds)
    }
}

pub fn predict_grid(model: &ClassifierModel, grid: &Grid) -> Result<Vec<usize>> {
    grid.points
        .iter()
        .map(|p| Ok(crate::argmax(&model.forward(p)?)))
        .collect()
}

pub fn grid_agreement(a: &[usize], b: &[usize]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len().max(1) as f64
}

/// Decision regions of the original, retrain, beta=0 and tilted models with
/// each variant's agreement against retrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryOutput {
    pub seed: u64,
    pub grid: Grid,
    pub agreement: BTreeMap<String, f64>,
    #[serde(skip)]
    pub predictions: BTreeMap<String, Vec<usize>>,
}

pub const BOUNDARY_VARIANTS: [&str; 4] = ["original", "retrain", "beta0", "tilted"];

/// Trains the four variants for `seed` without writing files.
pub fn toy_boundary(cfg: &ExperimentConfig, seed: u64) -> Result<BoundaryOutput> {
    cfg.validate()?;
    if cfg.architecture[0] != 2 {
        return Err(Error::usage("decision grids need 2-D data"));
    }
    let ctx = SeedContext::build(cfg, seed)?;
    let train = ctx.split.retain_train.concat(&ctx.split.forget_train, "train")?;
    let grid = Grid::covering(&cfg.grid, &train)?;
    let template = cfg.trw_template();
    let run = |beta: f64| -> Result<ClassifierModel> {
        let m = UnlearnConfig {
            beta: Some(beta),
            ..template.clone()
        };
        Ok(ctx.unlearn(cfg, &m)?.model)
    };
    let models = [
        ctx.original.clone(),
        ctx.retrain[0].clone(),
        run(0.0)?,
        run(template.beta())?,
    ];
    let mut predictions = BTreeMap::new();
    for (name, model) in BOUNDARY_VARIANTS.iter().zip(&models) {
        predictions.insert(name.to_string(), predict_grid(model, &grid)?);
    }
    let reference = &predictions["retrain"];
    let agreement = predictions
        .iter()
        .map(|(k, v)| (k.clone(), grid_agreement(v, reference)))
        .collect();
    Ok(BoundaryOutput {
        seed,
        grid,
        agreement,
        predictions,
    })
}

/// Writes `grid_<variant>.csv` (`x,y,predictedClass`, r² rows each) and
/// `agreement.json` into `dir`.
pub fn emit_toy_boundary(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<BoundaryOutput> {
    let out = toy_boundary(cfg, seed)?;
    for (name, preds) in &out.predictions {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "predictedClass"])?;
        for (p, c) in out.grid.points.iter().zip(preds) {
            w.write_record([p[0].to_string(), p[1].to_string(), c.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        crate::io::write_atomic(&dir.join(format!("grid_{name}.csv")), &bytes)?;
    }
    crate::io::write_json_atomic(&dir.join("agreement.json"), &out)?;
    Ok(out)
}
