//! Batch experiments: config files, parallel execution and artifact export.

pub mod config;
pub mod export;
pub mod run;

pub use config::{
    load_config, parse_config, Cell, ExperimentConfig, ExperimentPlan, LayoutChoice, OneOrMany, PolicyParams, Setup,
};
pub use export::{export_heatmap, export_time_series, heatmap_csv, heatmap_ppm, time_series_csv, write_run_artifacts};
pub use run::{run_dir, run_plan, CellSummary, PlanSummary, RunRecord, SUMMARY_HEADER};
