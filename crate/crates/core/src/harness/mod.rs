//! Metrics, evaluation sweeps and report emission.

pub mod commands;
mod experiment;
mod metrics;
mod pipeline;
mod report;

pub use experiment::{
    run_experiment, run_experiment_with_models, BaseCondition, ExperimentConfig, ExperimentResult,
    Method, ResultRow, Sweep, TestAngles, WelchRow,
};
pub use metrics::{accuracy, paired_errors, rmse, welch_t_test, within_tolerance, WelchResult};
pub use pipeline::{
    adversarial_counterparts, defense_data, simulate_splits, train_pipeline, DefenseData,
    PipelineConfig, TrainedPipeline,
};
pub use report::{
    emit_report, read_results, results_root, rows_from_csv, rows_to_csv, welch_to_csv,
    ReportFormat, RESULTS_ENV, RESULTS_FILE, WELCH_FILE,
};
