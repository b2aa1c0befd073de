//! Difference-imaging experiments on a disk tank: fine-mesh truth data,
//! coarse-mesh linearization, projection, reconstruction and metrics.

mod config;
mod metrics;
mod run;

pub use config::{
    CutoffConfig, ExperimentConfig, GeometryConfig, Inclusion, PriorConfig, ProjectorKind, ReferenceMode,
    TANK_ELECTRODES, TANK_HALF_WIDTH, TANK_RADIUS,
};
pub use metrics::{roi_metrics, RoiMetrics};
pub use run::{
    build_projector, nuisance_weighting, run_experiment, run_prepared, write_experiment_outputs, ExperimentReport,
    ExperimentResults, LegReport, PreparedExperiment, INVERSE_CRIME_RATIO,
};
