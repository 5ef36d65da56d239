//! Ground-truth chains and the noisy position sensor.
//!
//! Randomness comes from ChaCha8 streams. A run derives one independent
//! stream per purpose from its seed (see [`Stream`]), so two strategies that
//! share a seed also share their configuration and noise sequences.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};
use crate::fov::{visible, FieldOfView};
use crate::kinematics::{
    observe, ChainParams, JointConfig, JointLimits, Pose, Twist, PARAMS_PER_JOINT,
};

/// Joint excursion of the built-in arms and of chain files without limits: ±40°.
pub const DEFAULT_JOINT_RANGE: f64 = 40.0 * std::f64::consts::PI / 180.0;

const PLANAR_RANGE: f64 = 60.0 * std::f64::consts::PI / 180.0;

/// Purposes that get their own random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Configs = 2,
    Noise = 3,
    Probes = 4,
}

/// Seeded ChaCha8 generator; identical seeds give identical streams everywhere.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(seed: u64, stream: Stream) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// The simulator's private truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub name: String,
    pub params: ChainParams,
    pub joint_limits: JointLimits,
    pub fov: Option<FieldOfView>,
    /// σ²_R in m².
    pub obs_variance: f64,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        check_dim("joint limits", self.params.joints(), self.joint_limits.len())?;
        if !self.joint_limits.is_non_degenerate() {
            return Err(invalid("ground-truth joint limits must be non-degenerate"));
        }
        for (i, t) in self.params.twists.iter().enumerate() {
            if (t.w.norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("joint {i}: ground-truth axis must be unit")));
            }
        }
        if !(self.obs_variance.is_finite() && self.obs_variance >= 0.0) {
            return Err(invalid("observation variance must be finite and non-negative"));
        }
        if let Some(f) = &self.fov {
            f.validate()?;
        }
        Ok(())
    }

    pub fn joints(&self) -> usize {
        self.params.joints()
    }

    pub fn true_position(&self, q: &JointConfig) -> Result<Vector3<f64>> {
        observe(&self.params, q)
    }

    pub fn is_visible(&self, p: &Vector3<f64>) -> bool {
        visible(self.fov.as_ref(), p)
    }
}

/// Noisy end-effector position, or `None` when the true position is out of view.
///
/// Three normal draws are consumed on every call, visible or not.
pub fn measure(gt: &GroundTruth, q: &JointConfig, rng: &mut SeededRng) -> Result<Option<Vector3<f64>>> {
    if !gt.joint_limits.contains(q) {
        return Err(invalid("configuration outside joint limits"));
    }
    let truth = gt.true_position(q)?;
    let sigma = gt.obs_variance.sqrt();
    let noise = Vector3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
    Ok(gt.is_visible(&truth).then(|| truth + noise * sigma))
}

/// Uniform configuration inside the joint limits.
pub fn random_config(limits: &JointLimits, rng: &mut SeededRng) -> JointConfig {
    JointConfig::new(
        limits
            .bounds
            .iter()
            .map(|[lo, hi]| rng.uniform_in(*lo, *hi))
            .collect(),
    )
}

/// Names accepted by [`builtin_chain`].
pub const BUILTIN_CHAINS: [&str; 3] = ["planar3", "arm6", "arm12"];

fn revolute(axis: [f64; 3], point: [f64; 3]) -> Twist {
    Twist::revolute(Vector3::from(axis), Vector3::from(point)).expect("fixture axes are non-zero")
}

fn fixture(name: &str, twists: Vec<Twist>, tip: [f64; 3], range: f64, fov: FieldOfView) -> GroundTruth {
    let n = twists.len();
    GroundTruth {
        name: name.to_string(),
        params: ChainParams::new(twists, Pose::from_translation(Vector3::from(tip)))
            .expect("fixture chain is valid"),
        joint_limits: JointLimits::symmetric(n, range).expect("valid range"),
        fov: Some(fov),
        obs_variance: 1e-4,
    }
}

/// Built-in fixture chains. Base frame: x forward, y left, z up.
///
/// * `planar3`: three parallel z axes through (0,0,0), (0.3,0,0), (0.6,0,0);
///   tip at (1,0,0), i.e. links of 0.3, 0.3 and 0.4 m, with ±60° limits. A
///   camera 1 m above the workspace looks down with a cone narrow enough to
///   hide part of the reachable area.
/// * `arm6`: a humanoid arm stretched forward from a shoulder at the origin:
///   shoulder pitch/yaw/roll, elbow at 0.30 m, forearm roll, wrist at 0.55 m,
///   marker at (0.62, 0, −0.06). Camera at head height looking forward-down.
/// * `arm12`: torso yaw/pitch/roll at the waist, clavicle, shoulder
///   pitch/yaw/roll at (0, −0.2, 0.45), elbow, forearm roll, wrist pitch/yaw and
///   a hand joint; marker at (0.66, −0.22, 0.40).
///
/// All joints are zero-pitch revolute; the arms have ±40° limits. σ²_R = 1e-4.
pub fn builtin_chain(name: &str) -> Result<GroundTruth> {
    let (x, y, z) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    let gt = match name {
        "planar3" => fixture(
            name,
            vec![
                revolute(z, [0.0, 0.0, 0.0]),
                revolute(z, [0.3, 0.0, 0.0]),
                revolute(z, [0.6, 0.0, 0.0]),
            ],
            [1.0, 0.0, 0.0],
            PLANAR_RANGE,
            FieldOfView {
                camera: [0.78, 0.0, 1.0],
                axis: [0.0, 0.0, -1.0],
                half_angle: 0.47,
                min_depth: 0.2,
                max_depth: 2.0,
            },
        ),
        "arm6" => {
            let elbow = [0.30, 0.0, 0.0];
            fixture(
                name,
                vec![
                    revolute(y, [0.0; 3]),
                    revolute(z, [0.0; 3]),
                    revolute(x, [0.0; 3]),
                    revolute(y, elbow),
                    revolute(x, elbow),
                    revolute(z, [0.55, 0.0, 0.0]),
                ],
                [0.62, 0.0, -0.06],
                DEFAULT_JOINT_RANGE,
                FieldOfView {
                    camera: [0.05, 0.0, 0.35],
                    axis: [0.5, 0.0, -0.45],
                    half_angle: 0.9,
                    min_depth: 0.1,
                    max_depth: 1.5,
                },
            )
        }
        "arm12" => {
            let shoulder = [0.0, -0.2, 0.45];
            let elbow = [0.28, -0.2, 0.45];
            let wrist = [0.52, -0.2, 0.45];
            fixture(
                name,
                vec![
                    revolute(z, [0.0; 3]),
                    revolute(y, [0.0; 3]),
                    revolute(x, [0.0; 3]),
                    revolute(x, [0.0, -0.05, 0.42]),
                    revolute(y, shoulder),
                    revolute(z, shoulder),
                    revolute(x, shoulder),
                    revolute(y, elbow),
                    revolute(x, elbow),
                    revolute(y, wrist),
                    revolute(z, wrist),
                    revolute(y, [0.58, -0.2, 0.43]),
                ],
                [0.66, -0.22, 0.40],
                DEFAULT_JOINT_RANGE,
                FieldOfView {
                    camera: [0.05, 0.0, 0.75],
                    axis: [0.5, -0.2, -0.4],
                    half_angle: 1.1,
                    min_depth: 0.1,
                    max_depth: 2.0,
                },
            )
        }
        other => {
            return Err(invalid(format!(
                "unknown chain '{other}' (built-ins: {})",
                BUILTIN_CHAINS.join(", ")
            )))
        }
    };
    Ok(gt)
}

/// Parameter-space errors of an estimate against the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// Radians.
    pub orientation_error: f64,
    /// Meters.
    pub location_error: f64,
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Distance between the lines `p1 + s·d1` and `p2 + s·d2` (unit directions).
/// Near-parallel lines are compared through their points closest to the origin.
pub fn line_distance(p1: &Vector3<f64>, d1: &Vector3<f64>, p2: &Vector3<f64>, d2: &Vector3<f64>) -> f64 {
    let n = d1.cross(d2);
    let s = n.norm();
    if s > 1e-9 {
        ((p2 - p1).dot(&n) / s).abs()
    } else {
        let foot = |p: &Vector3<f64>, d: &Vector3<f64>| p - d * p.dot(d);
        (foot(p1, d1) - foot(p2, d2)).norm()
    }
}

fn point_line_distance(p: &Vector3<f64>, q: &Vector3<f64>, d: &Vector3<f64>) -> f64 {
    let r = p - q;
    (r - d * r.dot(d)).norm()
}

/// Orientation and location errors of the stacked estimate `x̂`.
///
/// Orientation: mean over ordered pairs `i ≠ j` of
/// `|∠(ŵᵢ, ŵⱼ) − ∠(wᵢ, wⱼ)|`, so a global rotation or rescaling of the
/// estimated axes costs nothing. An estimated axis of zero norm counts `π/2`
/// for every pair it is in. A single-joint chain has no pairs and scores 0.
///
/// Location: mean over joints of the distance between the true and estimated
/// axis lines, each line passing through `w × v` along `w`. For a zero axis the
/// distance from `w × v` to the true line is used.
pub fn metrics(estimate: &DVector<f64>, gt: &GroundTruth) -> Result<Metrics> {
    let n = gt.joints();
    check_dim("estimate", PARAMS_PER_JOINT * n, estimate.len())?;
    let est = ChainParams::from_vector(estimate, gt.params.zero_pose)?;
    let est_dirs: Vec<Option<Vector3<f64>>> = est.twists.iter().map(Twist::axis_direction).collect();
    if est_dirs.iter().any(Option::is_none) {
        log::warn!("estimate has a zero-norm axis; scoring it as maximally ambiguous");
    }
    let true_dirs: Vec<Vector3<f64>> = gt.params.twists.iter().map(|t| t.w.normalize()).collect();

    let mut orient = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            orient += match (&est_dirs[i], &est_dirs[j]) {
                (Some(a), Some(b)) => {
                    (angle_between(a, b) - angle_between(&true_dirs[i], &true_dirs[j])).abs()
                }
                _ => FRAC_PI_2,
            };
        }
    }
    let pairs = n * (n - 1);
    let orientation_error = if pairs == 0 { 0.0 } else { orient / pairs as f64 };

    let location_error = est
        .twists
        .iter()
        .zip(&gt.params.twists)
        .zip(&est_dirs)
        .zip(&true_dirs)
        .map(|(((e, t), ed), td)| {
            let tp = t.axis_point();
            match ed {
                Some(d) => line_distance(&e.axis_point(), d, &tp, td),
                None => point_line_distance(&e.axis_point(), &tp, td),
            }
        })
        .sum::<f64>()
        / n as f64;

    Ok(Metrics {
        orientation_error,
        location_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_measure_is_exact() {
        let mut gt = builtin_chain("planar3").unwrap();
        gt.obs_variance = 0.0;
        let q = JointConfig::new(vec![0.1, -0.2, 0.3]);
        let mut rng = SeededRng::new(3);
        let y = measure(&gt, &q, &mut rng).unwrap().unwrap();
        assert_eq!(y, gt.true_position(&q).unwrap());
    }

    #[test]
    fn empty_sector_never_measures() {
        let mut gt = builtin_chain("planar3").unwrap();
        gt.fov.as_mut().unwrap().half_angle = 0.0;
        let mut rng = SeededRng::new(3);
        for _ in 0..50 {
            let q = random_config(&gt.joint_limits, &mut rng);
            assert!(measure(&gt, &q, &mut rng).unwrap().is_none());
        }
    }

    #[test]
    fn measure_rejects_out_of_limits() {
        let gt = builtin_chain("planar3").unwrap();
        let q = JointConfig::new(vec![2.0, 0.0, 0.0]);
        assert!(measure(&gt, &q, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn degenerate_limits_pin_the_joint() {
        let limits = JointLimits::new(vec![[0.0, 0.0], [-1.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(9);
        for _ in 0..20 {
            assert_eq!(random_config(&limits, &mut rng).angles[0], 0.0);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |s: &mut SeededRng| (0..8).map(|_| s.uniform()).collect::<Vec<_>>();
        let a = draw(&mut SeededRng::stream(5, Stream::Configs));
        let b = draw(&mut SeededRng::stream(5, Stream::Configs));
        let c = draw(&mut SeededRng::stream(5, Stream::Noise));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fixture_sizes() {
        assert_eq!(builtin_chain("planar3").unwrap().joints(), 3);
        assert_eq!(builtin_chain("arm6").unwrap().joints(), 6);
        assert_eq!(builtin_chain("arm12").unwrap().joints(), 12);
        assert!(builtin_chain("arm7").is_err());
        for name in BUILTIN_CHAINS {
            builtin_chain(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn planar3_geometry() {
        let gt = builtin_chain("planar3").unwrap();
        for t in &gt.params.twists {
            assert_eq!(t.w, Vector3::z());
            assert_eq!(t.axis_point()[2], 0.0);
        }
        let tip = gt.true_position(&JointConfig::zeros(3)).unwrap();
        assert_eq!(tip, Vector3::new(1.0, 0.0, 0.0));
        // fold the last link back: tip at 0.6 - 0.4
        let q = JointConfig::new(vec![0.0, 0.0, std::f64::consts::PI]);
        let folded = observe(&gt.params, &q).unwrap();
        assert!((folded - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn perfect_estimate_scores_zero() {
        for name in BUILTIN_CHAINS {
            let gt = builtin_chain(name).unwrap();
            let m = metrics(&gt.params.to_vector(), &gt).unwrap();
            assert_eq!(m.orientation_error, 0.0);
            assert_eq!(m.location_error, 0.0);
        }
    }

    #[test]
    fn orientation_ignores_axis_scale() {
        let gt = builtin_chain("arm6").unwrap();
        let mut x = gt.params.to_vector();
        for j in 0..6 {
            for k in 0..3 {
                x[6 * j + k] *= 2.0;
            }
        }
        let m = metrics(&x, &gt).unwrap();
        assert!(m.orientation_error < 1e-15);
    }

    #[test]
    fn zero_axis_counts_right_angle() {
        let gt = builtin_chain("planar3").unwrap();
        let mut x = gt.params.to_vector();
        for k in 0..3 {
            x[k] = 0.0;
        }
        let m = metrics(&x, &gt).unwrap();
        // 4 of the 6 ordered pairs involve joint 0
        assert!((m.orientation_error - 4.0 * FRAC_PI_2 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn line_distance_cases() {
        let o = Vector3::zeros();
        // skew lines one unit apart
        let d = line_distance(&o, &Vector3::x(), &Vector3::new(0.0, 0.0, 1.0), &Vector3::y());
        assert!((d - 1.0).abs() < 1e-15);
        // parallel lines
        let d = line_distance(&o, &Vector3::z(), &Vector3::new(0.3, 0.4, 5.0), &Vector3::z());
        assert!((d - 0.5).abs() < 1e-15);
    }
}
