use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{Strategy, Thresholds};
use super::records::ExperimentRecord;
use crate::error::{invalid, Result};

/// First iteration from which `error` stays below `threshold` through the end
/// of the run. `None` when the run never settles below it, or failed.
pub fn iterations_to_threshold<F>(run: &[ExperimentRecord], error: F, threshold: f64) -> Option<usize>
where
    F: Fn(&ExperimentRecord) -> f64,
{
    if run.iter().any(|r| r.failure.is_some()) {
        return None;
    }
    let mut first_below = None;
    for r in run {
        if error(r) < threshold {
            first_below.get_or_insert(r.iteration);
        } else {
            first_below = None;
        }
    }
    first_below
}

/// Linear-interpolated quantile of ascending `sorted`, where `+∞` stands for
/// runs that never converged.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let frac = pos - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else if sorted[hi].is_infinite() {
        f64::INFINITY
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Quartiles; `None` stands for `+∞` (not reached).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| Some(quantile(&v, p)).filter(|x: &f64| x.is_finite());
        Self {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        }
    }

    /// Median as a number, `+∞` when not reached.
    pub fn median_value(&self) -> f64 {
        self.median.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub failed_runs: usize,
    pub orientation_iterations: Quartiles,
    pub location_iterations: Quartiles,
    /// Runs that never settled below the orientation threshold.
    pub orientation_censored: usize,
    pub location_censored: usize,
    pub final_orientation_error: Quartiles,
    pub final_location_error: Quartiles,
    pub final_prediction_error: Quartiles,
    pub mean_fov_rejections: f64,
}

/// Per-strategy statistics over seeds, ordered by strategy.
pub fn summarize(records: &[ExperimentRecord], thresholds: &Thresholds) -> Result<Vec<StrategySummary>> {
    if records.is_empty() {
        return Err(invalid("no records to summarize"));
    }
    let mut runs: BTreeMap<Strategy, BTreeMap<u64, Vec<ExperimentRecord>>> = BTreeMap::new();
    for r in records {
        runs.entry(r.strategy).or_default().entry(r.seed).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (strategy, mut seeds) in runs {
        let mut orient_its = Vec::new();
        let mut loc_its = Vec::new();
        let mut finals = [Vec::new(), Vec::new(), Vec::new()];
        let mut failed = 0;
        let mut rejections = 0.0;
        for run in seeds.values_mut() {
            run.sort_by_key(|r| r.iteration);
            let as_f = |it: Option<usize>| it.map_or(f64::INFINITY, |i| i as f64);
            orient_its.push(as_f(iterations_to_threshold(run, |r| r.orientation_error, thresholds.orientation)));
            loc_its.push(as_f(iterations_to_threshold(run, |r| r.location_error, thresholds.location)));
            let last = run.last().expect("runs are non-empty");
            failed += usize::from(run.iter().any(|r| r.failure.is_some()));
            finals[0].push(last.orientation_error);
            finals[1].push(last.location_error);
            finals[2].push(last.prediction_error);
            rejections += last.fov_rejections as f64;
        }
        let n = seeds.len();
        out.push(StrategySummary {
            strategy,
            runs: n,
            failed_runs: failed,
            orientation_censored: orient_its.iter().filter(|v| v.is_infinite()).count(),
            location_censored: loc_its.iter().filter(|v| v.is_infinite()).count(),
            orientation_iterations: Quartiles::of(&orient_its),
            location_iterations: Quartiles::of(&loc_its),
            final_orientation_error: Quartiles::of(&finals[0]),
            final_location_error: Quartiles::of(&finals[1]),
            final_prediction_error: Quartiles::of(&finals[2]),
            mean_fov_rejections: rejections / n as f64,
        });
    }
    Ok(out)
}

fn cell(q: &Quartiles) -> String {
    let f = |v: Option<f64>| v.map_or("inf".to_string(), |x| format!("{x:.4}"));
    format!("{} [{}, {}]", f(q.median), f(q.q1), f(q.q3))
}

/// Plain-text table, one row per strategy: median [q1, q3].
pub fn render_table(summaries: &[StrategySummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>5} {:>6}  {:<30} {:<30} {:<30} {:<30}",
        "strategy", "runs", "failed", "iters(orientation)", "iters(location)", "final orientation [rad]", "final location [m]"
    );
    for m in summaries {
        let _ = writeln!(
            s,
            "{:<16} {:>5} {:>6}  {:<30} {:<30} {:<30} {:<30}",
            m.strategy.name(),
            m.runs,
            m.failed_runs,
            cell(&m.orientation_iterations),
            cell(&m.location_iterations),
            cell(&m.final_orientation_error),
            cell(&m.final_location_error),
        );
    }
    s
}
