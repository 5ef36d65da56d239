//! Gaussian recursive estimation of static parameters.
//!
//! The belief `N(x̂, P)` is updated one observation at a time with the
//! linearized (EKF) measurement update:
//!
//! ```text
//! P⁻ = P + σ²_Q I
//! K  = P⁻ Hᵀ (H P⁻ Hᵀ + R)⁻¹
//! x̂' = x̂ + K (y − h(x̂, θ))
//! P' = (I − K H) P⁻ (I − K H)ᵀ + K R Kᵀ
//! ```
//!
//! with `R = σ²_R I`. The Joseph form keeps `P'` symmetric positive
//! semi-definite under rounding. A stochastic-gradient update on
//! `½‖y − h(x, θ)‖²` is provided as the passive baseline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Jitter added to the innovation covariance when the first factorization fails.
pub const INNOVATION_JITTER: f64 = 1e-12;

/// Tolerance on `‖P − Pᵀ‖∞` for a state to count as valid.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Most negative eigenvalue tolerated before a covariance is rejected.
pub const PSD_TOL: f64 = -1e-9;

/// A differentiable measurement model `y = h(x, input)`.
pub trait ObservationModel {
    type Input;

    fn param_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn predict(&self, x: &DVector<f64>, input: &Self::Input) -> Result<DVector<f64>>;
    /// `obs_dim × param_dim` Jacobian `∂h/∂x`.
    fn jacobian(&self, x: &DVector<f64>, input: &Self::Input) -> Result<DMatrix<f64>>;
}

/// Gaussian belief over the parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl EstimatorState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let state = Self { mean, covariance };
        state.validate()?;
        Ok(state)
    }

    /// `P = variance · I`.
    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(invalid("prior variance must be finite and non-negative"));
        }
        let n = mean.len();
        Self::new(mean, DMatrix::identity(n, n) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Checks finiteness, shape, symmetry and positive semi-definiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if n == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        check_dim("covariance rows", n, self.covariance.nrows())?;
        check_dim("covariance columns", n, self.covariance.ncols())?;
        if !self.mean.iter().chain(self.covariance.iter()).all(|v| v.is_finite()) {
            return Err(invalid("state must be finite"));
        }
        if asymmetry(&self.covariance) > SYMMETRY_TOL * self.covariance.amax().max(1.0) {
            return Err(invalid("covariance is not symmetric"));
        }
        match min_eigenvalue(&self.covariance) {
            Some(l) if l >= PSD_TOL * self.covariance.amax().max(1.0) => Ok(()),
            Some(l) => Err(invalid(format!("covariance not PSD (min eigenvalue {l:e})"))),
            None => Err(invalid("covariance eigen-decomposition failed")),
        }
    }

    /// Replaces negative eigenvalues of `P` by zero.
    pub fn clamp_psd(&mut self) {
        if let Some(eig) = SymmetricEigen::try_new(self.covariance.clone(), 1e-14, 10_000) {
            if eig.eigenvalues.iter().any(|&l| l < 0.0) {
                let vals = eig.eigenvalues.map(|l| l.max(0.0));
                let v = &eig.eigenvectors;
                self.covariance = v * DMatrix::from_diagonal(&vals) * v.transpose();
                symmetrize(&mut self.covariance);
            }
        }
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            mean: self.mean.iter().copied().collect(),
            covariance: self
                .covariance
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_snapshot()).expect("snapshot serializes")
    }

    /// Parses and validates a JSON snapshot.
    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::try_from(snap)
    }
}

/// Serialized form of an [`EstimatorState`]: mean and row-major covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl TryFrom<Snapshot> for EstimatorState {
    type Error = Error;

    fn try_from(s: Snapshot) -> Result<Self> {
        let n = s.mean.len();
        check_dim("covariance rows", n, s.covariance.len())?;
        for row in &s.covariance {
            check_dim("covariance columns", n, row.len())?;
        }
        let cov = DMatrix::from_fn(n, n, |i, j| s.covariance[i][j]);
        EstimatorState::new(DVector::from_vec(s.mean), cov)
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn min_eigenvalue(m: &DMatrix<f64>) -> Option<f64> {
    let eig = SymmetricEigen::try_new(m.clone(), 1e-14, 10_000)?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min.is_finite().then_some(min)
}

fn default_obs_variance() -> f64 {
    1e-4
}
fn default_stabilizing_variance() -> f64 {
    1e-6
}
fn default_stabilizing_period() -> usize {
    10
}

/// Noise levels of the measurement update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// σ²_R, isotropic observation noise in m².
    #[serde(default = "default_obs_variance")]
    pub obs_variance: f64,
    /// σ²_n, covariance inflation applied every `stabilizing_period` iterations.
    #[serde(default = "default_stabilizing_variance")]
    pub stabilizing_variance: f64,
    /// σ²_Q, added to `P` before every measurement update.
    #[serde(default)]
    pub state_noise_variance: f64,
    #[serde(default = "default_stabilizing_period")]
    pub stabilizing_period: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            obs_variance: default_obs_variance(),
            stabilizing_variance: default_stabilizing_variance(),
            state_noise_variance: 0.0,
            stabilizing_period: default_stabilizing_period(),
        }
    }
}

impl NoiseConfig {
    /// Observation noise only, no inflation of any kind.
    pub fn observation_only(obs_variance: f64) -> Self {
        Self {
            obs_variance,
            stabilizing_variance: 0.0,
            state_noise_variance: 0.0,
            stabilizing_period: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("obs_variance", self.obs_variance),
            ("stabilizing_variance", self.stabilizing_variance),
            ("state_noise_variance", self.state_noise_variance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if self.stabilizing_period == 0 {
            return Err(invalid("stabilizing_period must be at least 1"));
        }
        Ok(())
    }
}

fn default_learning_rate() -> f64 {
    0.5
}

/// Step size of the stochastic-gradient baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Step `t` uses `learning_rate / (1 + decay·t)`.
    #[serde(default)]
    pub decay: Option<f64>,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            decay: None,
        }
    }
}

impl GradientConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid("learning_rate must be positive"));
        }
        if let Some(d) = self.decay {
            if !(d.is_finite() && d >= 0.0) {
                return Err(invalid("decay must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn rate_at(&self, step: usize) -> f64 {
        match self.decay {
            Some(d) => self.learning_rate / (1.0 + d * step as f64),
            None => self.learning_rate,
        }
    }
}

/// Innovation quantities shared by the real update and the lookahead cost.
pub(crate) struct Innovation {
    /// `P⁻ = P + σ²_Q I`.
    pub prior: DMatrix<f64>,
    /// `P⁻ Hᵀ`.
    pub cross: DMatrix<f64>,
    pub chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

pub(crate) fn innovation(
    state: &EstimatorState,
    h: &DMatrix<f64>,
    noise: &NoiseConfig,
) -> Result<Innovation> {
    let n = state.dim();
    let m = h.nrows();
    check_dim("jacobian columns", n, h.ncols())?;
    let mut prior = state.covariance.clone();
    if noise.state_noise_variance > 0.0 {
        for i in 0..n {
            prior[(i, i)] += noise.state_noise_variance;
        }
    }
    let cross = &prior * h.transpose();
    let mut s = h * &cross;
    for i in 0..m {
        s[(i, i)] += noise.obs_variance;
    }
    symmetrize(&mut s);
    let chol = match s.clone().cholesky() {
        Some(c) => c,
        None => {
            for i in 0..m {
                s[(i, i)] += INNOVATION_JITTER;
            }
            s.cholesky().ok_or(Error::DegenerateUpdate)?
        }
    };
    Ok(Innovation { prior, cross, chol })
}

/// One Joseph-form measurement update.
///
/// The innovation is `y − h(x̂, input)` evaluated with the nonlinear model.
pub fn rls_update<M: ObservationModel>(
    state: &EstimatorState,
    model: &M,
    input: &M::Input,
    y: &DVector<f64>,
    noise: &NoiseConfig,
) -> Result<EstimatorState> {
    check_dim("state", model.param_dim(), state.dim())?;
    check_dim("observation", model.obs_dim(), y.len())?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(invalid("observation must be finite"));
    }
    let predicted = model.predict(&state.mean, input)?;
    let h = model.jacobian(&state.mean, input)?;
    let inn = innovation(state, &h, noise)?;

    // K = P⁻Hᵀ S⁻¹ = (S⁻¹ H P⁻)ᵀ
    let gain = inn.chol.solve(&inn.cross.transpose()).transpose();
    let mean = &state.mean + &gain * (y - predicted);

    let n = state.dim();
    let a = DMatrix::identity(n, n) - &gain * &h;
    let mut cov = &a * &inn.prior * a.transpose() + (&gain * gain.transpose()) * noise.obs_variance;
    symmetrize(&mut cov);

    if !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateUpdate);
    }
    Ok(EstimatorState {
        mean,
        covariance: cov,
    })
}

/// `P ← P + σ²_n I`.
pub fn apply_stabilizing_noise(state: &EstimatorState, noise: &NoiseConfig) -> EstimatorState {
    let mut next = state.clone();
    if noise.stabilizing_variance != 0.0 {
        for i in 0..next.dim() {
            next.covariance[(i, i)] += noise.stabilizing_variance;
        }
    }
    next
}

/// One gradient step on `½‖y − h(x, input)‖²`: `x + η Hᵀ (y − h(x, input))`.
pub fn gradient_update<M: ObservationModel>(
    model: &M,
    mean: &DVector<f64>,
    input: &M::Input,
    y: &DVector<f64>,
    cfg: &GradientConfig,
) -> Result<DVector<f64>> {
    check_dim("parameters", model.param_dim(), mean.len())?;
    check_dim("observation", model.obs_dim(), y.len())?;
    let residual = y - model.predict(mean, input)?;
    let h = model.jacobian(mean, input)?;
    Ok(mean + h.transpose() * residual * cfg.learning_rate)
}

/// RMS of `‖y − h(x̂, input)‖` over a probe set.
pub fn prediction_error<M: ObservationModel>(
    model: &M,
    mean: &DVector<f64>,
    probes: &[(M::Input, DVector<f64>)],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(invalid("prediction error needs at least one probe"));
    }
    let mut sum = 0.0;
    for (input, y) in probes {
        check_dim("probe observation", model.obs_dim(), y.len())?;
        sum += (y - model.predict(mean, input)?).norm_squared();
    }
    Ok((sum / probes.len() as f64).sqrt())
}
