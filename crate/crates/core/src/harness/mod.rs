//! Experiment orchestration: config files, scenario execution, aggregation
//! and report files.

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{ExperimentConfig, Resolved, Scenario};
pub use report::{emit_report, recompute_report, ReportSummary};
pub use scenario::{
    classify_outcome, derive_seed, moving_average, run_scenario, OutcomeHistogram, RunRecord,
    ScenarioOutput, NONE_LABEL,
};
