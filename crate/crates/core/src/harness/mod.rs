//! Demonstration grids, normalization, experiments on the trained model and
//! their CSV artifacts.

mod dataset;
mod experiment;
mod export;
mod norm;
mod pca;
mod probe;

pub use dataset::{generate_dataset, run_demonstration, GridConfig, SimSetup};
pub use experiment::{
    evaluate_rollout, pb_table_pca, run_online_experiment, run_variant_experiment, MetricTrace,
    OnlineReport, PbOverlay, PbUpdate, VariantExperimentConfig, VariantReport,
};
pub use export::{
    artifact_path, write_explained_csv, write_loss_csv, write_metric_table, write_online_csvs,
    write_pb_table_csv, write_probe_csv, write_trace_csv, write_variant_csvs,
};
pub use norm::{NormStats, STD_FLOOR};
pub use pca::{pca_project, PcaResult};
pub use probe::{linear_r2, probe_pb, ProbeResult};
