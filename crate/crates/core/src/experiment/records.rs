use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::Strategy;
use crate::error::{Error, Result};

/// State of one run after one iteration.
///
/// A run that fails ends with a record whose `failure` is set; its errors are
/// those of the last good estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecord {
    pub strategy: Strategy,
    pub seed: u64,
    /// 1-based.
    pub iteration: usize,
    /// Joint configuration visited at this iteration, radians.
    #[serde(default)]
    pub config: Vec<f64>,
    #[serde(deserialize_with = "nullable_f64")]
    pub orientation_error: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub location_error: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub prediction_error: f64,
    /// Trace of the covariance after the update (RLS strategies).
    #[serde(default)]
    pub covariance_trace: Option<f64>,
    /// Lookahead cost of the chosen configuration (active strategy).
    #[serde(default)]
    pub selection_cost: Option<f64>,
    #[serde(default)]
    pub selection_evaluations: Option<usize>,
    /// Wall-clock seconds, present only when timing is recorded.
    #[serde(default)]
    pub selection_seconds: Option<f64>,
    /// Measurements lost to the field of view so far.
    pub fov_rejections: usize,
    /// Updates skipped as numerically degenerate so far.
    #[serde(default)]
    pub skipped_updates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

// JSON has no non-finite numbers; serde_json writes them as null
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub const CSV_HEADER: &str = "strategy,seed,iteration,config,orientation_error,location_error,prediction_error,\
covariance_trace,selection_cost,selection_evaluations,selection_seconds,fov_rejections,skipped_updates,failure";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl ExperimentRecord {
    pub fn to_csv_row(&self) -> String {
        let failure = self
            .failure
            .as_deref()
            .map(|f| format!("\"{}\"", f.replace('"', "\"\"")))
            .unwrap_or_default();
        // space-separated so the column needs no quoting
        let config = self.config.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.seed,
            self.iteration,
            config,
            self.orientation_error,
            self.location_error,
            self.prediction_error,
            opt(&self.covariance_trace),
            opt(&self.selection_cost),
            opt(&self.selection_evaluations),
            opt(&self.selection_seconds),
            self.fov_rejections,
            self.skipped_updates,
            failure,
        )
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[ExperimentRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Parse(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(mut out: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    Ok(())
}

/// Reads JSON-lines records; blank lines are ignored.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ExperimentRecord>> {
    read_jsonl(text.as_bytes())
}
