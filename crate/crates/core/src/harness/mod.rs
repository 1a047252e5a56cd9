//! Scenario replay, estimator evaluation and report files.

mod experiment;
mod report;
mod scenario;
pub mod synthetic;

pub use experiment::{
    divergence_report, divergence_summary, run_experiment, sort_records, DivergenceRow,
    DivergenceSummary, Estimator, EvaluationRecord, ExclusionCount, Experiment, ExperimentConfig,
    ExperimentError, ExperimentReport, SkippedTx, DEFAULT_DELTAS,
};
pub use report::{
    compute_metrics, csv_to_json, emit_metrics, emit_report, json_to_csv, kruskal_rows,
    metrics_table, metrics_to_csv, render_records, rows_from_csv, rows_from_json, rows_to_csv,
    rows_to_json, KruskalRow, MetricRow, RecordRow, ReportError, ReportFormat,
};
pub use scenario::{
    load_scenario, state_at, BlockFile, ContextMode, LoadOptions, Scenario, ScenarioBlock,
    ScenarioError, ScenarioFile, ScenarioTx, TxFile,
};
