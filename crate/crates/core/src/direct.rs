//! DIRECT (DIviding RECTangles) global minimization over a box.
//!
//! The box is mapped onto the unit cube. Every live hyperrectangle stores the
//! value of the objective at its center. Each iteration selects the
//! *potentially optimal* rectangles, i.e. those for which some rate-of-change
//! constant `K > 0` makes them minimize the lower bound `f(c) − K·d` over all
//! rectangles while still promising a nontrivial improvement
//! `f(c) − K·d ≤ f_min − ε|f_min|`, and trisects them along their longest
//! sides.
//!
//! Two selection variants are provided. [`Variant::Direct`] keeps every
//! rectangle that ties for the lowest value in its measure class;
//! [`Variant::DirectL`] keeps at most one per class, which spends fewer
//! evaluations per sweep.
//!
//! Ties are always broken towards the lowest rectangle index or the lowest
//! dimension index, so a deterministic objective gives a deterministic trace.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Rectangles at this subdivision depth are no longer split.
const MAX_LEVEL: u32 = 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Direct,
    #[default]
    DirectL,
}

fn default_max_evaluations() -> usize {
    200
}
fn default_epsilon() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectConfig {
    /// Objective evaluations allowed, including the initial center.
    pub max_evaluations: usize,
    pub epsilon: f64,
    pub variant: Variant,
    /// Per-dimension `[lo, hi]` of the search box.
    pub bounds: Vec<[f64; 2]>,
    pub record_trace: bool,
}

impl DirectConfig {
    pub fn new(bounds: Vec<[f64; 2]>, max_evaluations: usize) -> Self {
        Self {
            max_evaluations,
            epsilon: default_epsilon(),
            variant: Variant::default(),
            bounds,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(invalid("DIRECT needs at least one dimension"));
        }
        if self.max_evaluations == 0 {
            return Err(invalid("evaluation budget must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid("epsilon must be finite and non-negative"));
        }
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("dimension {i}: bounds [{lo}, {hi}] are degenerate")));
            }
        }
        Ok(())
    }
}

/// Optimizer knobs that do not depend on the search box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSettings {
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub variant: Variant,
}

impl Default for DirectSettings {
    fn default() -> Self {
        Self {
            max_evaluations: default_max_evaluations(),
            epsilon: default_epsilon(),
            variant: Variant::default(),
        }
    }
}

impl DirectSettings {
    pub fn with_bounds(&self, bounds: Vec<[f64; 2]>) -> DirectConfig {
        DirectConfig {
            max_evaluations: self.max_evaluations,
            epsilon: self.epsilon,
            variant: self.variant,
            bounds,
            record_trace: false,
        }
    }
}

/// A search cell in unit-cube coordinates. Side `i` has length `3^-levels[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperRect {
    pub center: Vec<f64>,
    pub levels: Vec<u32>,
    /// Objective value at the center.
    pub value: f64,
}

fn third_pow(level: u32) -> f64 {
    3f64.powi(-(level as i32))
}

impl HyperRect {
    /// The whole unit cube.
    pub fn unit(dim: usize, value: f64) -> Self {
        Self {
            center: vec![0.5; dim],
            levels: vec![0; dim],
            value,
        }
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.levels.iter().map(|&k| third_pow(k)).collect()
    }

    /// Center-to-corner distance `½‖sides‖₂`. Computed from the sorted levels so
    /// that rectangles of the same shape class get bit-identical measures.
    pub fn measure(&self) -> f64 {
        let mut levels = self.levels.clone();
        levels.sort_unstable();
        0.5 * levels
            .iter()
            .map(|&k| third_pow(k) * third_pow(k))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.levels.iter().map(|&k| third_pow(k)).product()
    }

    /// Whether `p` lies in the closed rectangle.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.center
            .iter()
            .zip(self.side_lengths())
            .zip(p)
            .all(|((c, s), x)| (x - c).abs() <= 0.5 * s * (1.0 + 1e-12))
    }
}

/// One objective evaluation, in original coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(rename = "eval")]
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub iterations: usize,
    pub trace: Option<Vec<Evaluation>>,
}

/// Writes evaluations as line-delimited JSON records.
pub fn write_trace<W: Write>(mut out: W, trace: &[Evaluation]) -> std::io::Result<()> {
    for e in trace {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn sanitize(value: f64) -> f64 {
    if value.is_nan() {
        log::warn!("objective returned NaN; treating it as +inf");
        f64::INFINITY
    } else {
        value
    }
}

/// Indices of the potentially optimal rectangles.
///
/// Returned in ascending index order. For [`Variant::DirectL`] at most one
/// index per measure class is returned: the lowest value, ties by index.
pub fn potentially_optimal(
    rects: &[HyperRect],
    f_min: f64,
    epsilon: f64,
    variant: Variant,
) -> Vec<usize> {
    // measure bits -> (measure, class min, indices attaining it)
    let mut classes: BTreeMap<u64, (f64, f64, Vec<usize>)> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        let d = r.measure();
        let entry = classes
            .entry(d.to_bits())
            .or_insert((d, f64::INFINITY, Vec::new()));
        if r.value < entry.1 || entry.2.is_empty() {
            entry.1 = r.value;
            entry.2 = vec![i];
        } else if r.value == entry.1 {
            entry.2.push(i);
        }
    }
    // positive finite f64 bits order like the values
    let classes: Vec<(f64, f64, Vec<usize>)> = classes.into_values().collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut take = |members: &Vec<usize>| match variant {
        Variant::Direct => chosen.extend(members.iter().copied()),
        Variant::DirectL => chosen.push(members[0]),
    };

    if !f_min.is_finite() {
        // nothing finite to compare against: explore the largest cells
        if let Some((_, _, members)) = classes.last() {
            take(members);
        }
    } else {
        let target = f_min - epsilon * f_min.abs();
        for (j, (dj, fj, members)) in classes.iter().enumerate() {
            if !fj.is_finite() {
                continue;
            }
            let k_low = classes[..j]
                .iter()
                .map(|(di, fi, _)| (fj - fi) / (dj - di))
                .fold(f64::NEG_INFINITY, f64::max);
            let k_high = classes[j + 1..]
                .iter()
                .map(|(di, fi, _)| (fi - fj) / (di - dj))
                .fold(f64::INFINITY, f64::min);
            let hull = k_high > 0.0 && k_low <= k_high;
            let improves = k_high == f64::INFINITY || fj - k_high * dj <= target;
            if hull && improves {
                take(members);
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Children of a trisection plus every evaluation it spent.
#[derive(Clone, Debug, PartialEq)]
pub struct Trisection {
    /// Side pieces in split order (minus, plus per dimension), then the center piece.
    pub children: Vec<HyperRect>,
    /// `(unit-cube point, value)` in evaluation order, including discarded ones.
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

/// Splits `rect` along all of its longest sides.
///
/// The points `c ± (s/3)eᵢ` are evaluated for every longest dimension `i`,
/// then dimensions are split in order of increasing `min(f(c − δeᵢ), f(c + δeᵢ))`
/// so that the best samples land in the largest children. At most `budget`
/// evaluations are spent; a dimension whose two samples are not both available
/// is left unsplit and any lone sample is discarded.
pub fn trisect<F>(rect: &HyperRect, mut f: F, budget: usize) -> Trisection
where
    F: FnMut(&[f64]) -> f64,
{
    let min_level = rect.levels.iter().copied().min().unwrap_or(0);
    let delta = third_pow(min_level) / 3.0;
    let mut evaluations = Vec::new();
    let mut samples = Vec::new();

    if min_level < MAX_LEVEL {
        for dim in (0..rect.levels.len()).filter(|&i| rect.levels[i] == min_level) {
            let remaining = budget - evaluations.len();
            if remaining == 0 {
                break;
            }
            let mut minus = rect.center.clone();
            minus[dim] -= delta;
            let f_minus = sanitize(f(&minus));
            evaluations.push((minus.clone(), f_minus));
            if remaining == 1 {
                break;
            }
            let mut plus = rect.center.clone();
            plus[dim] += delta;
            let f_plus = sanitize(f(&plus));
            evaluations.push((plus.clone(), f_plus));
            samples.push((dim, minus, f_minus, plus, f_plus));
        }
    }

    // stable: equal scores keep ascending dimension order
    samples.sort_by(|a, b| a.2.min(a.4).total_cmp(&b.2.min(b.4)));

    let mut center = rect.clone();
    let mut children = Vec::with_capacity(2 * samples.len() + 1);
    for (dim, minus, f_minus, plus, f_plus) in samples {
        center.levels[dim] += 1;
        children.push(HyperRect {
            center: minus,
            levels: center.levels.clone(),
            value: f_minus,
        });
        children.push(HyperRect {
            center: plus,
            levels: center.levels.clone(),
            value: f_plus,
        });
    }
    children.push(center);
    Trisection {
        children,
        evaluations,
    }
}

/// What one call to [`DirectSearch::step`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    /// Potentially optimal rectangle indices, before any splitting.
    pub selected: Vec<usize>,
    pub evaluations: usize,
}

/// Step-wise DIRECT driver; [`minimize`] runs it to exhaustion.
pub struct DirectSearch<F> {
    f: F,
    cfg: DirectConfig,
    rects: Vec<HyperRect>,
    evaluations: usize,
    iterations: usize,
    best_point: Vec<f64>,
    best_value: f64,
    trace: Vec<Evaluation>,
    stalled: bool,
}

impl<F> DirectSearch<F>
where
    F: FnMut(&[f64]) -> f64,
{
    /// Validates the config and evaluates the center of the box.
    pub fn new(f: F, cfg: DirectConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.bounds.len();
        let mut search = Self {
            f,
            cfg,
            rects: Vec::new(),
            evaluations: 0,
            iterations: 0,
            best_point: Vec::new(),
            best_value: f64::INFINITY,
            trace: Vec::new(),
            stalled: false,
        };
        let center = vec![0.5; dim];
        let value = search.evaluate(&center);
        search.rects.push(HyperRect::unit(dim, value));
        if search.best_point.is_empty() {
            search.best_point = search.to_box(&center);
        }
        Ok(search)
    }

    fn to_box(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.cfg.bounds)
            .map(|(x, [lo, hi])| lo + x * (hi - lo))
            .collect()
    }

    fn evaluate(&mut self, u: &[f64]) -> f64 {
        let point = self.to_box(u);
        let value = sanitize((self.f)(&point));
        self.record(point, value);
        value
    }

    fn record(&mut self, point: Vec<f64>, value: f64) {
        if value < self.best_value {
            self.best_value = value;
            self.best_point = point.clone();
        }
        if self.cfg.record_trace {
            self.trace.push(Evaluation {
                index: self.evaluations,
                point,
                value,
            });
        }
        self.evaluations += 1;
    }

    pub fn is_finished(&self) -> bool {
        self.stalled || self.evaluations >= self.cfg.max_evaluations
    }

    pub fn rects(&self) -> &[HyperRect] {
        &self.rects
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.best_point, self.best_value)
    }

    /// Runs one select-and-divide sweep. `None` once the budget is spent.
    pub fn step(&mut self) -> Option<IterationReport> {
        if self.is_finished() {
            return None;
        }
        let selected =
            potentially_optimal(&self.rects, self.best_value, self.cfg.epsilon, self.cfg.variant);
        let before = self.evaluations;
        for &idx in &selected {
            let remaining = self.cfg.max_evaluations - self.evaluations;
            if remaining == 0 {
                break;
            }
            let bounds = self.cfg.bounds.clone();
            let f = &mut self.f;
            let split = trisect(
                &self.rects[idx],
                |u| {
                    let p: Vec<f64> = u
                        .iter()
                        .zip(&bounds)
                        .map(|(x, [lo, hi])| lo + x * (hi - lo))
                        .collect();
                    f(&p)
                },
                remaining,
            );
            for (u, value) in split.evaluations {
                let point = self.to_box(&u);
                self.record(point, value);
            }
            let mut children = split.children;
            let center = children.pop().expect("trisection keeps the center");
            self.rects[idx] = center;
            self.rects.extend(children);
        }
        self.iterations += 1;
        if self.evaluations == before {
            self.stalled = true;
        }
        Some(IterationReport {
            selected,
            evaluations: self.evaluations - before,
        })
    }

    pub fn into_result(self) -> DirectResult {
        DirectResult {
            best_point: self.best_point,
            best_value: self.best_value,
            evaluations_used: self.evaluations,
            iterations: self.iterations,
            trace: self.cfg.record_trace.then_some(self.trace),
        }
    }
}

/// Minimizes `f` over `cfg.bounds` within `cfg.max_evaluations` evaluations.
pub fn minimize<F>(f: F, cfg: DirectConfig) -> Result<DirectResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut search = DirectSearch::new(f, cfg)?;
    while search.step().is_some() {}
    Ok(search.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(levels: &[u32], value: f64) -> HyperRect {
        HyperRect {
            center: vec![0.5; levels.len()],
            levels: levels.to_vec(),
            value,
        }
    }

    #[test]
    fn single_rect_is_selected() {
        let r = vec![rect(&[2, 2], 7.0)];
        assert_eq!(potentially_optimal(&r, 7.0, 1e-4, Variant::Direct), vec![0]);
        assert_eq!(potentially_optimal(&r, 7.0, 1e-4, Variant::DirectL), vec![0]);
    }

    #[test]
    fn equal_measure_lower_value_dominates() {
        let r = vec![rect(&[1, 1], 2.0), rect(&[1, 1], 1.0)];
        assert_eq!(potentially_optimal(&r, 1.0, 1e-4, Variant::Direct), vec![1]);
        assert_eq!(potentially_optimal(&r, 1.0, 1e-4, Variant::DirectL), vec![1]);
    }

    #[test]
    fn ties_within_class() {
        let r = vec![rect(&[1, 1], 1.0), rect(&[1, 1], 1.0), rect(&[1, 1], 1.0)];
        assert_eq!(potentially_optimal(&r, 1.0, 0.0, Variant::Direct), vec![0, 1, 2]);
        assert_eq!(potentially_optimal(&r, 1.0, 0.0, Variant::DirectL), vec![0]);
    }

    #[test]
    fn epsilon_guard_with_negative_fmin() {
        // small cell at the minimum, big cell slightly worse
        let r = vec![rect(&[3, 3], -1.0), rect(&[0, 0], -0.9999)];
        // K_high = 0.0001 / (d_big - d_small): bound ≈ -1.00001 > -1 - 0.01
        assert_eq!(potentially_optimal(&r, -1.0, 1e-2, Variant::Direct), vec![1]);
        assert_eq!(potentially_optimal(&r, -1.0, 0.0, Variant::Direct), vec![0, 1]);
    }

    #[test]
    fn all_infinite_explores_largest() {
        let r = vec![rect(&[1, 1], f64::INFINITY), rect(&[0, 1], f64::INFINITY)];
        assert_eq!(potentially_optimal(&r, f64::INFINITY, 1e-4, Variant::DirectL), vec![1]);
    }

    #[test]
    fn one_dimensional_trisection() {
        let split = trisect(&HyperRect::unit(1, 0.5), |u| u[0], 100);
        let mut centers: Vec<f64> = split.children.iter().map(|r| r.center[0]).collect();
        centers.sort_by(f64::total_cmp);
        let want = [1.0 / 6.0, 0.5, 5.0 / 6.0];
        for (c, w) in centers.iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
        assert!(split.children.iter().all(|r| r.levels == vec![1]));
    }

    #[test]
    fn constant_square_trisection_tie_order() {
        let split = trisect(&HyperRect::unit(2, 1.0), |_| 1.0, 100);
        let ch = &split.children;
        assert_eq!(ch.len(), 5);
        // dimension 0 first: two 1/3 × 1 slabs
        assert_eq!(ch[0].levels, vec![1, 0]);
        assert_eq!(ch[1].levels, vec![1, 0]);
        assert!((ch[0].center[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((ch[1].center[0] - 5.0 / 6.0).abs() < 1e-15);
        // then the middle slab is cut along dimension 1
        for c in &ch[2..] {
            assert_eq!(c.levels, vec![1, 1]);
        }
        assert_eq!(ch[4].center, vec![0.5, 0.5]);
        let vol: f64 = ch.iter().map(HyperRect::volume).sum();
        assert!((vol - 1.0).abs() < 1e-15);
    }

    #[test]
    fn best_samples_get_largest_children() {
        // dimension 1 has the better samples, so it is split first
        let split = trisect(&HyperRect::unit(2, 1.0), |u| 1.0 - (u[1] - 0.5).abs(), 100);
        assert_eq!(split.children[0].levels, vec![0, 1]);
        assert_eq!(split.children[2].levels, vec![1, 1]);
    }

    #[test]
    fn trisection_respects_budget() {
        let split = trisect(&HyperRect::unit(3, 1.0), |u| u[0] + u[1] + u[2], 3);
        assert_eq!(split.evaluations.len(), 3);
        // only dimension 0 has both samples
        assert_eq!(split.children.len(), 3);
        let vol: f64 = split.children.iter().map(HyperRect::volume).sum();
        assert!((vol - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_function_keeps_first_center() {
        let res = minimize(|_| 3.0, DirectConfig::new(vec![[0.0, 1.0]; 2], 30)).unwrap();
        assert_eq!(res.best_value, 3.0);
        assert_eq!(res.best_point, vec![0.5, 0.5]);
        assert_eq!(res.evaluations_used, 30);
    }

    #[test]
    fn nan_is_penalized() {
        let res = minimize(
            |x| if x[0] < 0.5 { f64::NAN } else { x[0] },
            DirectConfig::new(vec![[0.0, 1.0]], 40),
        )
        .unwrap();
        assert!(res.best_value.is_finite());
        assert!(res.best_point[0] >= 0.5);
    }

    #[test]
    fn invalid_configs() {
        assert!(minimize(|_| 0.0, DirectConfig::new(vec![], 10)).is_err());
        assert!(minimize(|_| 0.0, DirectConfig::new(vec![[1.0, 1.0]], 10)).is_err());
        assert!(minimize(|_| 0.0, DirectConfig::new(vec![[0.0, 1.0]], 0)).is_err());
        let mut cfg = DirectConfig::new(vec![[0.0, 1.0]], 10);
        cfg.epsilon = -1.0;
        assert!(minimize(|_| 0.0, cfg).is_err());
    }

    #[test]
    fn budget_of_one() {
        let res = minimize(|x| x[0], DirectConfig::new(vec![[-1.0, 1.0]], 1)).unwrap();
        assert_eq!(res.evaluations_used, 1);
        assert_eq!(res.best_point, vec![0.0]);
    }

    #[test]
    fn trace_lines() {
        let mut cfg = DirectConfig::new(vec![[0.0, 2.0]], 4);
        cfg.record_trace = true;
        let res = minimize(|x| x[0], cfg).unwrap();
        let trace = res.trace.unwrap();
        assert_eq!(trace.len(), 4);
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(r#"{"eval":0,"point":[1.0],"value":1.0}"#));
    }
}
