//! Experiment orchestration, metrics files and the robustness monitor.

mod config;
mod metrics;
mod monitor;
mod run;

pub use config::{EnvConfig, ExperimentConfig, Variant};
pub use metrics::{
    mean_std, read_metrics, read_summary, rows_of, safety_rate, summarize, write_curves, write_metrics,
    write_summary, MetricsRow, PhaseRows, SummaryRow, METRICS_HEADER,
};
pub use monitor::{formula_text, monitor, monitor_text, MonitorOutcome};
pub use run::{
    evaluate_checkpoint, load_trainer, prepare_output_dir, run_dir, run_experiment, run_single, summarize_dir,
    trace_path, ExperimentReport, RunFailure, RunResult, AUDIT, CHECKPOINT, CURVES, EVAL_METRICS, FORMULAS,
    REWARDS, SUMMARY, TRACES, TRAIN_METRICS,
};
