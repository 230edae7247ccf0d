//! Config-driven Monte Carlo forecasting studies, panel-data ingestion and
//! rolling forecasts.

mod config;
mod experiment;
mod output;
mod panel;
mod rolling;

pub use config::{
    ExperimentConfig, MethodConfig, RollingConfig, ScenarioConfig, VarMask, DEFAULT_P_MAX,
};
pub use experiment::{
    check_failures, mse_table_csv, relative_mse_table_csv, results_from_errors_csv, run_experiment,
    ExperimentReport, FailureRecord, MethodResult, ReplicateErrors,
};
pub use output::write_atomic;
pub use panel::{
    assemble_panel, ingest_panel, read_levels, read_trade_matrix, trade_weights, write_panel_files,
    Frequency, PanelDataset, PanelOptions, PanelPaths,
};
pub use rolling::{
    level_errors, run_rolling_forecast, synthetic_panel, RollingReport, SyntheticPanelSpec,
    MIN_ROLLING_PERIODS,
};

/// JSON schema of [`ExperimentConfig`].
pub const EXPERIMENT_SCHEMA: &str = include_str!("../../schemas/experiment.schema.json");
