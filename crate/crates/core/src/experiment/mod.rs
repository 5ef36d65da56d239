//! Simulated calibration experiments: configuration, the per-seed loop,
//! record files and summary statistics.

mod config;
mod records;
mod runner;
mod summary;

pub use config::{apply_override, ActiveSettings, ExperimentConfig, InitConfig, Strategy, Thresholds};
pub use records::{parse_jsonl, read_jsonl, write_csv, write_jsonl, ExperimentRecord, CSV_HEADER};
pub use runner::{resolve_chain, run_experiment, run_seed, run_strategy, Setup};
pub use summary::{iterations_to_threshold, quantile, render_table, summarize, Quartiles, StrategySummary};
