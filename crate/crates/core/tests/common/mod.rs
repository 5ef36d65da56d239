//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use bodyschema::direct::{HyperRect, Variant};
use bodyschema::kinematics::{ChainParams, JointConfig, Pose, Twist};
use bodyschema::{ObservationModel, Result};
use nalgebra::{DMatrix, DVector, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_vector3(r: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
    )
}

/// Unit-axis twist with an arbitrary moment (so pitch is generally non-zero).
pub fn random_twist(r: &mut ChaCha8Rng) -> Twist {
    Twist::new(unit_vector(r), random_vector3(r, 1.0))
}

pub fn random_pose(r: &mut ChaCha8Rng) -> Pose {
    let axis = unit_vector(r);
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), r.random_range(-3.0..3.0));
    Pose::new(*rot.matrix(), random_vector3(r, 1.0))
}

pub fn random_chain(r: &mut ChaCha8Rng, joints: usize) -> ChainParams {
    let twists = (0..joints).map(|_| random_twist(r)).collect();
    ChainParams::new(twists, random_pose(r)).unwrap()
}

pub fn random_config(r: &mut ChaCha8Rng, joints: usize, range: f64) -> JointConfig {
    JointConfig::new((0..joints).map(|_| r.random_range(-range..range)).collect())
}

/// `e^A` by scaling and squaring a truncated Taylor series.
pub fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * 4.0;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.1 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut term = Matrix4::<f64>::identity();
    let mut sum = Matrix4::<f64>::identity();
    for k in 1..=20 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// The 4×4 generator `[[ŵ, v], [0, 0]]·θ`.
pub fn twist_generator(xi: &Twist, angle: f64) -> Matrix4<f64> {
    let (w, v) = (xi.w * angle, xi.v * angle);
    Matrix4::new(
        0.0, -w[2], w[1], v[0], //
        w[2], 0.0, -w[0], v[1], //
        -w[1], w[0], 0.0, v[2], //
        0.0, 0.0, 0.0, 0.0,
    )
}

/// Forward kinematics by multiplying matrix exponentials.
pub fn fk_oracle(params: &ChainParams, q: &JointConfig) -> Matrix4<f64> {
    let mut t = Matrix4::<f64>::identity();
    for (xi, &a) in params.twists.iter().zip(&q.angles) {
        t *= expm(&twist_generator(xi, a));
    }
    t * params.zero_pose.to_homogeneous()
}

/// Central differences of `f` at `x`, one column per coordinate.
pub fn central_differences<F>(f: F, x: &DVector<f64>, rows: usize, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut jac = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += step;
        minus[j] -= step;
        jac.set_column(j, &((f(&plus) - f(&minus)) / (2.0 * step)));
    }
    jac
}

/// `y = A(input)·x`, for linear-Gaussian fixtures.
pub struct LinearModel {
    pub dim: usize,
    pub rows: usize,
}

impl ObservationModel for LinearModel {
    type Input = DMatrix<f64>;

    fn param_dim(&self) -> usize {
        self.dim
    }
    fn obs_dim(&self) -> usize {
        self.rows
    }
    fn predict(&self, x: &DVector<f64>, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(a * x)
    }
    fn jacobian(&self, _x: &DVector<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(a.clone())
    }
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_spd(r: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = random_matrix(r, dim, dim);
    &a * a.transpose() * 0.5 + DMatrix::identity(dim, dim) * 0.1
}

/// Regularized least squares over all observations at once:
/// `argmin ‖x − x₀‖²_{P₀⁻¹} + Σ ‖yₜ − Aₜx‖² / σ²`, with its covariance.
pub fn batch_tikhonov(
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    data: &[(DMatrix<f64>, DVector<f64>)],
    obs_variance: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let p0_inv = p0.clone().try_inverse().unwrap();
    let mut info = p0_inv.clone();
    let mut rhs = &p0_inv * x0;
    for (a, y) in data {
        info += a.transpose() * a / obs_variance;
        rhs += a.transpose() * y / obs_variance;
    }
    let cov = info.clone().try_inverse().unwrap();
    (&cov * rhs, cov)
}

/// `tr((P⁻¹ + HᵀH/σ²)⁻¹)`.
pub fn information_form_trace(p: &DMatrix<f64>, h: &DMatrix<f64>, obs_variance: f64) -> f64 {
    let info = p.clone().try_inverse().unwrap() + h.transpose() * h / obs_variance;
    info.try_inverse().unwrap().trace()
}

/// Potentially optimal rectangles by definition: for each rectangle, search
/// for a slope `K > 0` under which it minimizes `f − K·d` over all
/// rectangles and beats `f_min − ε|f_min|`. Candidate slopes are the pairwise
/// breakpoints, which is where the feasible interval of `K` can end.
pub fn potentially_optimal_brute(rects: &[HyperRect], f_min: f64, epsilon: f64, variant: Variant) -> Vec<usize> {
    let d: Vec<f64> = rects.iter().map(HyperRect::measure).collect();
    let f: Vec<f64> = rects.iter().map(|r| r.value).collect();
    let target = f_min - epsilon * f_min.abs();
    let tol = 1e-12;
    let mut chosen = Vec::new();
    for j in 0..rects.len() {
        if !f[j].is_finite() {
            continue;
        }
        // K must satisfy f_j − K d_j ≤ f_i − K d_i for every i
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let mut ok = true;
        for i in 0..rects.len() {
            if i == j {
                continue;
            }
            if d[i] == d[j] {
                if f[i] < f[j] {
                    ok = false;
                }
            } else if d[i] < d[j] {
                lo = lo.max((f[j] - f[i]) / (d[j] - d[i]));
            } else {
                hi = hi.min((f[i] - f[j]) / (d[i] - d[j]));
            }
        }
        if !ok || lo > hi + tol || hi <= 0.0 {
            continue;
        }
        // the bound is weakest at the largest admissible K
        let improves = hi.is_infinite() || f[j] - hi * d[j] <= target + tol * target.abs().max(1.0);
        if improves {
            chosen.push(j);
        }
    }
    if variant == Variant::DirectL {
        let mut seen: Vec<u64> = Vec::new();
        chosen.retain(|&j| {
            let key = d[j].to_bits();
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
    }
    chosen
}
