//! Experiment orchestration: configs, per-seed pipelines, result tables and
//! report emitters.

mod config;
mod experiment;
mod reports;
mod results;
mod seeds;
mod toy;

pub use config::{DatasetConfig, ExperimentConfig, GridConfig, SimilaritySource};
pub use experiment::{
    ablate_beta, nested_forget_sets, run_experiment, run_methods, run_multiclass, CellError, ExperimentOutput,
    NeighborInfo, SeedContext,
};
pub use reports::{confusion_matrix, reassignment_report, Reassignment};
pub use results::{
    read_results_csv, read_results_csv_path, write_results_csv, write_results_csv_path, Metrics, MetricsRow,
    RESULTS_HEADER,
};
pub use toy::{emit_toy_boundary, grid_agreement, predict_grid, toy_boundary, BoundaryOutput, Grid};
