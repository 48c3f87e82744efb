//! Experiment orchestration: single trainings, the topology × convolution
//! sweep, robustness curves and report tables.

mod config;
mod report;
mod robustness;
mod store;
mod sweep;

pub use config::{Cell, ExperimentConfig, HeadWidths, SweepGrid};
pub use report::{fmt3, fmt_pm, render_csv, render_curve, render_table, report_rows, write_report, ReportRow};
pub use robustness::{robustness_eval, RobustnessPoint, SavedModel};
pub use store::{dataset_digest, run_id, FailureRecord, RunRecord, RunStore};
pub use sweep::{
    assemble_sweep, checkpoint_path, collect_sweeps, run_sweep, train_single, CellFailure, CellSummary, SweepResult,
};
