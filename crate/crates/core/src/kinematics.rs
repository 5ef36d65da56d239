//! Twist-based serial-chain kinematics.
//!
//! Each joint is described by a twist `ξ = [v, w]`. A joint moved by angle
//! `θ` applies the rigid motion
//!
//! ```text
//! e^{ξθ} = | e^{[w]θ}   (I - e^{[w]θ})(w × v) + w wᵀ v θ |
//!          |    0                        1                |
//! ```
//!
//! and the end-effector pose of an `n`-joint chain is the product of
//! exponentials `e^{ξ₁θ₁} ⋯ e^{ξₙθₙ} · T(0)`, where `T(0)` is the known
//! zero-configuration pose. All motions are expressed in the base frame.
//!
//! The parameter vector used by the estimator stacks the twists as
//! `(w₁, v₁, …, wₙ, vₙ)`, six entries per joint. Non-unit `w` is accepted
//! everywhere: the rotation is then by `‖w‖θ` about `w/‖w‖`, which is what the
//! formula above gives when read literally.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};

use crate::error::{check_dim, invalid, Result};
use crate::estimator::ObservationModel;

/// Parameters per joint in the stacked parameter vector.
pub const PARAMS_PER_JOINT: usize = 6;

/// Below this norm `w` is treated as zero and the joint as a pure translation.
const ZERO_AXIS_NORM: f64 = 1e-12;

/// Step of the central-difference Jacobian.
pub const FD_STEP: f64 = 1e-6;

/// Screw parameters of one joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    /// Rotation axis direction (unit for a canonical revolute joint).
    pub w: Vector3<f64>,
    /// Moment term in meters. For a revolute joint through point `q`, `v = q × w`.
    pub v: Vector3<f64>,
}

impl Twist {
    pub fn new(w: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { w, v }
    }

    /// Zero-pitch revolute joint about the line through `point` with direction `axis`.
    /// The axis is normalized.
    pub fn revolute(axis: Vector3<f64>, point: Vector3<f64>) -> Result<Self> {
        let norm = axis.norm();
        if !(norm.is_finite() && norm > ZERO_AXIS_NORM) || !point.iter().all(|c| c.is_finite()) {
            return Err(invalid("revolute axis must be finite and non-zero"));
        }
        let w = axis / norm;
        Ok(Self { w, v: point.cross(&w) })
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }

    /// Rescales to unit `w`, keeping the axis line and `w·v`. `None` for a zero axis.
    pub fn normalized(&self) -> Option<Self> {
        let s = self.w.norm();
        (s > ZERO_AXIS_NORM).then(|| Self {
            w: self.w / s,
            v: self.v * s,
        })
    }

    /// Point on the rotation axis closest to `w × v`; for unit `w` and zero
    /// pitch this is the foot of the perpendicular from the origin.
    pub fn axis_point(&self) -> Vector3<f64> {
        self.w.cross(&self.v)
    }

    /// Unit axis direction, `None` when `w` vanishes.
    pub fn axis_direction(&self) -> Option<Vector3<f64>> {
        let n = self.w.norm();
        (n > ZERO_AXIS_NORM).then(|| self.w / n)
    }

    fn from_slice(s: &[f64]) -> Self {
        Self {
            w: Vector3::new(s[0], s[1], s[2]),
            v: Vector3::new(s[3], s[4], s[5]),
        }
    }
}

/// Rigid transform; the homogeneous form is `[[rotation, translation], [0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `RᵀR = I` and `det R = 1` within `tol`, all entries finite.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let finite = self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .all(|c| c.is_finite());
        finite
            && (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Twelve numbers: rotation row-major, then translation.
    pub fn to_row_major12(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[0],
            t[1],
            t[2],
        ]
    }

    pub fn from_row_major12(v: &[f64]) -> Result<Self> {
        check_dim("pose entries", 12, v.len())?;
        let pose = Pose::new(
            Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]),
            Vector3::new(v[9], v[10], v[11]),
        );
        if !pose.is_rigid(1e-9) {
            return Err(invalid("pose rotation must be orthonormal with det +1"));
        }
        Ok(pose)
    }
}

/// Joint angles in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig {
    pub angles: Vec<f64>,
}

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        Self { angles }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(angles: Vec<f64>) -> Self {
        Self::new(angles)
    }
}

/// Per-joint `[lo, hi]` bounds in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLimits {
    pub bounds: Vec<[f64; 2]>,
}

impl JointLimits {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("joint limits must cover at least one joint"));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("joint {i}: limits [{lo}, {hi}] are not ordered")));
            }
        }
        Ok(Self { bounds })
    }

    /// `±half_range` radians on every joint.
    pub fn symmetric(n: usize, half_range: f64) -> Result<Self> {
        Self::new(vec![[-half_range, half_range]; n])
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn contains(&self, q: &JointConfig) -> bool {
        q.len() == self.len()
            && q
                .angles
                .iter()
                .zip(&self.bounds)
                .all(|(a, [lo, hi])| *lo <= *a && *a <= *hi)
    }

    /// Whether every joint has a non-empty interior.
    pub fn is_non_degenerate(&self) -> bool {
        self.bounds.iter().all(|[lo, hi]| lo < hi)
    }
}

/// Geometric parameters of an `n`-joint chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainParams {
    pub twists: Vec<Twist>,
    /// End-effector pose at `θ = 0`; known, never estimated.
    pub zero_pose: Pose,
}

impl ChainParams {
    pub fn new(twists: Vec<Twist>, zero_pose: Pose) -> Result<Self> {
        if twists.is_empty() {
            return Err(invalid("a chain needs at least one joint"));
        }
        if !twists.iter().all(Twist::is_finite) {
            return Err(invalid("twist components must be finite"));
        }
        Ok(Self { twists, zero_pose })
    }

    pub fn joints(&self) -> usize {
        self.twists.len()
    }

    pub fn param_dim(&self) -> usize {
        PARAMS_PER_JOINT * self.twists.len()
    }

    /// Stacked `(w₁, v₁, …, wₙ, vₙ)`.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.param_dim(),
            self.twists
                .iter()
                .flat_map(|t| t.w.iter().chain(t.v.iter()).copied().collect::<Vec<_>>()),
        )
    }

    pub fn from_vector(x: &DVector<f64>, zero_pose: Pose) -> Result<Self> {
        if x.is_empty() || x.len() % PARAMS_PER_JOINT != 0 {
            return Err(invalid(format!(
                "parameter vector length {} is not a positive multiple of 6",
                x.len()
            )));
        }
        Self::new(twists_of(x.as_slice()), zero_pose)
    }
}

fn twists_of(x: &[f64]) -> Vec<Twist> {
    x.chunks_exact(PARAMS_PER_JOINT).map(Twist::from_slice).collect()
}

pub(crate) fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

/// Rotation by `‖w‖·angle` about `w`.
fn rotation_exp(w: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = w.norm();
    if n <= ZERO_AXIS_NORM {
        return Matrix3::identity();
    }
    let phi = n * angle;
    let k = skew(&(w / n));
    let half = 0.5 * phi;
    Matrix3::identity() + k * phi.sin() + k * k * (2.0 * half.sin() * half.sin())
}

/// Right Jacobian of SO(3) at rotation vector `omega`.
fn so3_right_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let phi = omega.norm();
    let k = skew(omega);
    let k2 = k * k;
    if phi < 1e-4 {
        let p2 = phi * phi;
        Matrix3::identity() - k * (0.5 - p2 / 24.0) + k2 * (1.0 / 6.0 - p2 / 120.0)
    } else {
        let half = 0.5 * phi;
        let a = 2.0 * half.sin() * half.sin() / (phi * phi);
        let b = (phi - phi.sin()) / (phi * phi * phi);
        Matrix3::identity() - k * a + k2 * b
    }
}

fn check_twist_finite(xi: &Twist, angle: f64) -> Result<()> {
    if xi.is_finite() && angle.is_finite() {
        Ok(())
    } else {
        Err(invalid("twist and angle must be finite"))
    }
}

/// Rigid motion `e^{ξθ}`. A (numerically) zero `w` gives the pure translation `vθ`.
pub fn twist_exp(xi: &Twist, angle: f64) -> Result<Pose> {
    check_twist_finite(xi, angle)?;
    Ok(twist_exp_unchecked(xi, angle))
}

fn twist_exp_unchecked(xi: &Twist, angle: f64) -> Pose {
    let Twist { w, v } = xi;
    if w.norm() <= ZERO_AXIS_NORM {
        return Pose::from_translation(v * angle);
    }
    let r = rotation_exp(w, angle);
    let t = (Matrix3::identity() - r) * w.cross(v) + w * (w.dot(v) * angle);
    Pose::new(r, t)
}

fn check_config(joints: usize, q: &JointConfig) -> Result<()> {
    check_dim("joint angles", joints, q.len())?;
    if q.angles.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(invalid("joint angles must be finite"))
    }
}

/// `∏ e^{ξᵢθᵢ} · T(0)`.
pub fn forward_kinematics(params: &ChainParams, q: &JointConfig) -> Result<Pose> {
    check_config(params.joints(), q)?;
    Ok(fk_twists(&params.twists, &params.zero_pose, &q.angles))
}

fn fk_twists(twists: &[Twist], zero_pose: &Pose, angles: &[f64]) -> Pose {
    let mut pose = Pose::identity();
    for (xi, &a) in twists.iter().zip(angles) {
        if a != 0.0 {
            pose = pose.compose(&twist_exp_unchecked(xi, a));
        }
    }
    pose.compose(zero_pose)
}

/// End-effector position `h(x, θ)`.
pub fn observe(params: &ChainParams, q: &JointConfig) -> Result<Vector3<f64>> {
    forward_kinematics(params, q).map(|p| p.translation)
}

/// How `∂h/∂x` is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMethod {
    #[default]
    Analytic,
    /// Central differences with step [`FD_STEP`].
    FiniteDifference,
}

/// `3 × 6n` Jacobian of [`observe`] with respect to the stacked parameters.
pub fn observation_jacobian(params: &ChainParams, q: &JointConfig) -> Result<DMatrix<f64>> {
    check_config(params.joints(), q)?;
    Ok(analytic_jacobian(&params.twists, &params.zero_pose, &q.angles))
}

/// Central-difference counterpart of [`observation_jacobian`].
pub fn observation_jacobian_fd(params: &ChainParams, q: &JointConfig) -> Result<DMatrix<f64>> {
    check_config(params.joints(), q)?;
    Ok(fd_jacobian(&params.to_vector(), &params.zero_pose, &q.angles))
}

fn analytic_jacobian(twists: &[Twist], zero_pose: &Pose, angles: &[f64]) -> DMatrix<f64> {
    let n = twists.len();
    let exps: Vec<Pose> = twists
        .iter()
        .zip(angles)
        .map(|(xi, &a)| twist_exp_unchecked(xi, a))
        .collect();

    // suffix[i] = e^{ξᵢ₊₁θᵢ₊₁} ⋯ e^{ξₙθₙ} · p₀
    let mut suffix = vec![zero_pose.translation; n];
    for i in (0..n.saturating_sub(1)).rev() {
        suffix[i] = exps[i + 1].transform_point(&suffix[i + 1]);
    }

    let mut jac = DMatrix::zeros(3, PARAMS_PER_JOINT * n);
    let mut prefix_rot = Matrix3::identity();
    for i in 0..n {
        let Twist { w, v } = &twists[i];
        let theta = angles[i];
        let b = &suffix[i];
        let r = &exps[i].rotation;
        let (dw, dv) = if w.norm() <= ZERO_AXIS_NORM {
            (-skew(b) * theta, Matrix3::identity() * theta)
        } else {
            let u = w.cross(v);
            let jr = so3_right_jacobian(&(w * theta));
            let i_minus_r = Matrix3::identity() - r;
            let dw = r * skew(&(u - b)) * jr * theta - i_minus_r * skew(v)
                + (Matrix3::identity() * w.dot(v) + w * v.transpose()) * theta;
            let dv = i_minus_r * skew(w) + w * w.transpose() * theta;
            (dw, dv)
        };
        let col = PARAMS_PER_JOINT * i;
        jac.fixed_view_mut::<3, 3>(0, col)
            .copy_from(&(prefix_rot * dw));
        jac.fixed_view_mut::<3, 3>(0, col + 3)
            .copy_from(&(prefix_rot * dv));
        prefix_rot *= r;
    }
    jac
}

fn fd_jacobian(x: &DVector<f64>, zero_pose: &Pose, angles: &[f64]) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(3, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + FD_STEP;
        let plus = fk_twists(&twists_of(probe.as_slice()), zero_pose, angles).translation;
        probe[j] = orig - FD_STEP;
        let minus = fk_twists(&twists_of(probe.as_slice()), zero_pose, angles).translation;
        probe[j] = orig;
        jac.set_column(j, &((plus - minus) / (2.0 * FD_STEP)));
    }
    jac
}

/// The chain as a measurement model over its stacked parameter vector.
#[derive(Clone, Debug)]
pub struct ChainModel {
    pub joints: usize,
    pub zero_pose: Pose,
    pub jacobian: JacobianMethod,
}

impl ChainModel {
    pub fn new(joints: usize, zero_pose: Pose) -> Self {
        Self {
            joints,
            zero_pose,
            jacobian: JacobianMethod::Analytic,
        }
    }

    pub fn for_chain(params: &ChainParams) -> Self {
        Self::new(params.joints(), params.zero_pose)
    }

    pub fn with_jacobian(mut self, method: JacobianMethod) -> Self {
        self.jacobian = method;
        self
    }

    pub fn params(&self, x: &DVector<f64>) -> Result<ChainParams> {
        check_dim("parameter vector", self.param_dim(), x.len())?;
        ChainParams::from_vector(x, self.zero_pose)
    }

    fn checked<'a>(&self, x: &'a DVector<f64>, q: &JointConfig) -> Result<Vec<Twist>> {
        check_dim("parameter vector", self.param_dim(), x.len())?;
        check_config(self.joints, q)?;
        if !x.iter().all(|c| c.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        Ok(twists_of(x.as_slice()))
    }

    /// End-effector position for the stacked parameters.
    pub fn position(&self, x: &DVector<f64>, q: &JointConfig) -> Result<Vector3<f64>> {
        let twists = self.checked(x, q)?;
        Ok(fk_twists(&twists, &self.zero_pose, &q.angles).translation)
    }
}

impl ObservationModel for ChainModel {
    type Input = JointConfig;

    fn param_dim(&self) -> usize {
        PARAMS_PER_JOINT * self.joints
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn predict(&self, x: &DVector<f64>, q: &JointConfig) -> Result<DVector<f64>> {
        let p = self.position(x, q)?;
        Ok(DVector::from_column_slice(p.as_slice()))
    }

    fn jacobian(&self, x: &DVector<f64>, q: &JointConfig) -> Result<DMatrix<f64>> {
        let twists = self.checked(x, q)?;
        Ok(match self.jacobian {
            JacobianMethod::Analytic => analytic_jacobian(&twists, &self.zero_pose, &q.angles),
            JacobianMethod::FiniteDifference => fd_jacobian(x, &self.zero_pose, &q.angles),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn z_chain(zero: Vector3<f64>) -> ChainParams {
        ChainParams::new(
            vec![Twist::new(Vector3::z(), Vector3::zeros())],
            Pose::from_translation(zero),
        )
        .unwrap()
    }

    fn generic_chain() -> ChainParams {
        ChainParams::new(
            vec![
                Twist::revolute(Vector3::new(0.1, 0.2, 1.0), Vector3::new(0.0, 0.1, 0.0)).unwrap(),
                Twist::revolute(Vector3::new(1.0, -0.3, 0.2), Vector3::new(0.3, 0.0, 0.1)).unwrap(),
                Twist::revolute(Vector3::new(0.0, 1.0, 0.4), Vector3::new(0.5, 0.2, 0.0)).unwrap(),
            ],
            Pose::from_translation(Vector3::new(0.7, 0.1, -0.2)),
        )
        .unwrap()
    }

    #[test]
    fn zero_angle_is_identity() {
        let xi = Twist::new(Vector3::new(0.3, -0.2, 0.9), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(twist_exp(&xi, 0.0).unwrap(), Pose::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let xi = Twist::new(Vector3::z(), Vector3::zeros());
        let p = twist_exp(&xi, FRAC_PI_2).unwrap().transform_point(&Vector3::x());
        assert!((p - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn zero_axis_is_pure_translation() {
        let xi = Twist::new(Vector3::zeros(), Vector3::new(1.0, -2.0, 0.5));
        let pose = twist_exp(&xi, 0.3).unwrap();
        assert_eq!(pose.rotation, Matrix3::identity());
        assert!((pose.translation - Vector3::new(0.3, -0.6, 0.15)).norm() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let xi = Twist::new(Vector3::new(f64::NAN, 0.0, 1.0), Vector3::zeros());
        assert!(twist_exp(&xi, 0.1).is_err());
        let ok = Twist::new(Vector3::z(), Vector3::zeros());
        assert!(twist_exp(&ok, f64::INFINITY).is_err());
    }

    #[test]
    fn exponential_group_property() {
        let xi = generic_chain().twists[1];
        let ab = twist_exp(&xi, 0.4).unwrap().compose(&twist_exp(&xi, -1.1).unwrap());
        let sum = twist_exp(&xi, -0.7).unwrap();
        assert!((ab.to_homogeneous() - sum.to_homogeneous()).amax() < 1e-12);
    }

    #[test]
    fn revolute_fixes_its_axis_point() {
        let q = Vector3::new(0.3, -0.1, 0.2);
        let xi = Twist::revolute(Vector3::new(0.0, 1.0, 1.0), q).unwrap();
        let moved = twist_exp(&xi, 1.3).unwrap().transform_point(&q);
        assert!((moved - q).norm() < 1e-14);
    }

    #[test]
    fn fk_zero_config_is_zero_pose() {
        let c = generic_chain();
        assert_eq!(forward_kinematics(&c, &JointConfig::zeros(3)).unwrap(), c.zero_pose);
    }

    #[test]
    fn fk_half_turn() {
        let c = z_chain(Vector3::new(1.0, 0.0, 0.0));
        let t = forward_kinematics(&c, &JointConfig::new(vec![PI])).unwrap().translation;
        assert!((t - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        let y = observe(&c, &JointConfig::new(vec![FRAC_PI_2])).unwrap();
        assert!((y - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fk_dimension_mismatch() {
        let c = generic_chain();
        assert!(matches!(
            forward_kinematics(&c, &JointConfig::zeros(2)),
            Err(crate::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fk_is_order_sensitive() {
        let c = generic_chain();
        let mut rev = c.clone();
        rev.twists.reverse();
        let q = JointConfig::new(vec![0.4, -0.6, 0.9]);
        let mut q_rev = q.clone();
        q_rev.angles.reverse();
        let a = observe(&c, &q).unwrap();
        let b = observe(&rev, &q_rev).unwrap();
        assert!((a - b).norm() > 1e-3);
    }

    #[test]
    fn jacobian_vanishes_at_zero_config() {
        let c = generic_chain();
        let h = observation_jacobian(&c, &JointConfig::zeros(3)).unwrap();
        assert_eq!(h.amax(), 0.0);
        let z = z_chain(Vector3::x());
        let hz = observation_jacobian(&z, &JointConfig::zeros(1)).unwrap();
        assert_eq!(hz.amax(), 0.0);
    }

    #[test]
    fn jacobian_matches_fd_non_unit_axes() {
        let mut c = generic_chain();
        c.twists[0].w *= 1.7;
        c.twists[2].w *= 0.4;
        c.twists[1].v += Vector3::new(0.1, 0.2, -0.3);
        let q = JointConfig::new(vec![0.5, -1.2, 2.0]);
        let a = observation_jacobian(&c, &q).unwrap();
        let f = observation_jacobian_fd(&c, &q).unwrap();
        assert!((a - f).amax() < 1e-8);
    }

    #[test]
    fn jacobian_small_rotation_branch() {
        let c = generic_chain();
        let q = JointConfig::new(vec![1e-6, -3e-5, 2e-7]);
        let a = observation_jacobian(&c, &q).unwrap();
        let f = observation_jacobian_fd(&c, &q).unwrap();
        assert!((a - f).amax() < 1e-8);
    }

    #[test]
    fn parameter_vector_order() {
        let c = generic_chain();
        let x = c.to_vector();
        assert_eq!(x.len(), 18);
        assert_eq!(x.rows(0, 3), c.twists[0].w);
        assert_eq!(x.rows(3, 3), c.twists[0].v);
        assert_eq!(x.rows(12, 3), c.twists[2].w);
        assert_eq!(ChainParams::from_vector(&x, c.zero_pose).unwrap(), c);
    }

    #[test]
    fn normalization_keeps_axis_line() {
        let xi = Twist::new(Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.0, -0.15, 0.0));
        let n = xi.normalized().unwrap();
        assert!((n.w.norm() - 1.0).abs() < 1e-15);
        assert!((n.axis_point() - xi.axis_point()).norm() < 1e-15);
        assert!(Twist::new(Vector3::zeros(), Vector3::x()).normalized().is_none());
    }

    #[test]
    fn pose_row_major_roundtrip_and_validation() {
        let p = twist_exp(&generic_chain().twists[1], 0.8).unwrap();
        let back = Pose::from_row_major12(&p.to_row_major12()).unwrap();
        assert_eq!(back, p);
        let mut bad = p.to_row_major12();
        bad[0] = 2.0;
        assert!(Pose::from_row_major12(&bad).is_err());
        assert!(Pose::from_row_major12(&bad[..11]).is_err());
    }

    #[test]
    fn joint_limits() {
        let l = JointLimits::symmetric(2, 0.5).unwrap();
        assert!(l.contains(&JointConfig::new(vec![0.5, -0.5])));
        assert!(!l.contains(&JointConfig::new(vec![0.51, 0.0])));
        assert!(!l.contains(&JointConfig::new(vec![0.0])));
        assert!(JointLimits::new(vec![[1.0, 0.0]]).is_err());
        assert!(JointLimits::new(vec![]).is_err());
        assert!(!JointLimits::new(vec![[0.0, 0.0]]).unwrap().is_non_degenerate());
    }
}
