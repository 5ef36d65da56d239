//! A-optimal selection of the next joint configuration.
//!
//! The cost of a candidate configuration is the trace of the covariance the
//! estimator would hold after observing the end effector there. The
//! observation is simulated at the current estimate, so the innovation is zero
//! and only the covariance changes. The candidate minimizing that trace over
//! the joint box is found with DIRECT.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::direct::{self, DirectSettings, Evaluation};
use crate::error::{invalid, Error, Result};
use crate::estimator::{innovation, EstimatorState, NoiseConfig, ObservationModel};
use crate::fov::{visible, FieldOfView};
use crate::kinematics::{ChainModel, JointConfig, JointLimits};

#[derive(Clone, Debug)]
pub struct SelectionProblem {
    pub state: EstimatorState,
    pub model: ChainModel,
    pub noise: NoiseConfig,
    pub joint_limits: JointLimits,
    /// Applied to the predicted (not the true) end-effector position.
    pub fov: Option<FieldOfView>,
    pub optimizer: DirectSettings,
    pub record_trace: bool,
    /// Configurations already tried without producing a measurement. The
    /// true end effector was out of view there even though the estimate said
    /// otherwise, so candidates within `exclusion_radius` (max-norm, radians)
    /// of one are treated as unobservable.
    pub excluded: Vec<JointConfig>,
    pub exclusion_radius: f64,
}

impl SelectionProblem {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.joint_limits.len() != self.model.joints || !self.joint_limits.is_non_degenerate() {
            return Err(invalid("joint limits must match the chain and be non-degenerate"));
        }
        if self.state.dim() != self.model.param_dim() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.model.param_dim(),
                got: self.state.dim(),
            });
        }
        if let Some(f) = &self.fov {
            f.validate()?;
        }
        if !(self.exclusion_radius.is_finite() && self.exclusion_radius >= 0.0) {
            return Err(invalid("exclusion radius must be finite and non-negative"));
        }
        if self.excluded.iter().any(|q| q.len() != self.model.joints) {
            return Err(invalid("excluded configurations must match the chain"));
        }
        Ok(())
    }

    fn is_excluded(&self, q: &JointConfig) -> bool {
        self.excluded.iter().any(|e| {
            e.angles
                .iter()
                .zip(&q.angles)
                .all(|(a, b)| (a - b).abs() <= self.exclusion_radius)
        })
    }

    /// Cost surcharge for unobservable candidates: the prior trace, so such a
    /// candidate costs twice as much as learning nothing.
    pub fn penalty(&self) -> f64 {
        self.state.trace()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub config: JointConfig,
    pub cost: f64,
    pub evaluations: usize,
    /// Wall-clock seconds spent in the optimizer.
    pub duration: f64,
    pub trace: Option<Vec<Evaluation>>,
}

/// Trace of the simulated posterior covariance after observing at `q`.
pub fn lookahead_cost(problem: &SelectionProblem, q: &JointConfig) -> Result<f64> {
    if !problem.joint_limits.contains(q) {
        return Err(invalid("candidate configuration outside joint limits"));
    }
    Ok(cost_unchecked(problem, q))
}

fn cost_unchecked(problem: &SelectionProblem, q: &JointConfig) -> f64 {
    let uninformative = problem.state.trace() + problem.penalty();
    if problem.is_excluded(q) {
        return uninformative;
    }
    let mean = &problem.state.mean;
    let predicted = match problem.model.position(mean, q) {
        Ok(p) => p,
        Err(_) => return uninformative,
    };
    if !visible(problem.fov.as_ref(), &predicted) {
        return uninformative;
    }
    let h = match problem.model.jacobian(mean, q) {
        Ok(h) => h,
        Err(_) => return uninformative,
    };
    match posterior_trace(&problem.state, &h, &problem.noise) {
        Ok(t) => t,
        Err(e) => {
            log::debug!("lookahead at {:?} is degenerate: {e}", q.angles);
            uninformative
        }
    }
}

/// `tr(P⁺)` for the optimal gain, `tr(P⁻) − tr(P⁻Hᵀ S⁻¹ H P⁻)`, which equals the
/// trace of the Joseph-form covariance without forming it.
fn posterior_trace(state: &EstimatorState, h: &DMatrix<f64>, noise: &NoiseConfig) -> Result<f64> {
    let inn = innovation(state, h, noise)?;
    let solved = inn.chol.solve(&inn.cross.transpose());
    let reduction = inn.cross.transpose().component_mul(&solved).sum();
    Ok(inn.prior.trace() - reduction)
}

/// `arg min` of [`lookahead_cost`] over the joint box, found with DIRECT.
pub fn select_next(problem: &SelectionProblem) -> Result<SelectionResult> {
    problem.validate()?;
    let mut cfg = problem.optimizer.with_bounds(problem.joint_limits.bounds.clone());
    cfg.record_trace = problem.record_trace;

    let start = Instant::now();
    let res = direct::minimize(
        |angles| {
            let q = JointConfig::new(clamp_to(angles, &problem.joint_limits));
            cost_unchecked(problem, &q)
        },
        cfg,
    )?;
    let duration = start.elapsed().as_secs_f64();

    Ok(SelectionResult {
        config: JointConfig::new(clamp_to(&res.best_point, &problem.joint_limits)),
        cost: res.best_value,
        evaluations: res.evaluations_used,
        duration,
        trace: res.trace,
    })
}

// box mapping can round a hair past a limit
fn clamp_to(angles: &[f64], limits: &JointLimits) -> Vec<f64> {
    angles
        .iter()
        .zip(&limits.bounds)
        .map(|(a, [lo, hi])| a.clamp(*lo, *hi))
        .collect()
}

/// `tr(P) − lookahead_cost`: how much total variance observing at `q` removes.
pub fn greedy_trace_reduction(problem: &SelectionProblem, q: &JointConfig) -> Result<f64> {
    Ok(problem.state.trace() - lookahead_cost(problem, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::rls_update;
    use crate::fov::FieldOfView;
    use crate::kinematics::{ChainParams, Pose, Twist};
    use nalgebra::{DVector, Vector3};

    fn one_joint(limits: [f64; 2]) -> SelectionProblem {
        let chain = ChainParams::new(
            vec![Twist::revolute(Vector3::z(), Vector3::zeros()).unwrap()],
            Pose::from_translation(Vector3::new(0.5, 0.0, 0.0)),
        )
        .unwrap();
        SelectionProblem {
            state: EstimatorState::isotropic(chain.to_vector(), 0.1).unwrap(),
            model: ChainModel::for_chain(&chain),
            noise: NoiseConfig::observation_only(1e-4),
            joint_limits: JointLimits::new(vec![limits]).unwrap(),
            fov: None,
            optimizer: DirectSettings {
                max_evaluations: 60,
                ..DirectSettings::default()
            },
            record_trace: false,
            excluded: Vec::new(),
            exclusion_radius: 0.0,
        }
    }

    #[test]
    fn zero_jacobian_costs_prior_plus_state_noise() {
        let mut p = one_joint([-0.5, 0.5]);
        p.noise.state_noise_variance = 0.003;
        let cost = lookahead_cost(&p, &JointConfig::zeros(1)).unwrap();
        assert!((cost - (p.state.trace() + 6.0 * 0.003)).abs() < 1e-12);
        let red = greedy_trace_reduction(&p, &JointConfig::zeros(1)).unwrap();
        assert!((red + 6.0 * 0.003).abs() < 1e-12);
    }

    #[test]
    fn informative_candidate_reduces_trace() {
        let p = one_joint([-0.5, 0.5]);
        assert!(greedy_trace_reduction(&p, &JointConfig::new(vec![0.4])).unwrap() > 0.0);
    }

    #[test]
    fn matches_rls_update_trace() {
        let mut p = one_joint([-1.0, 1.0]);
        p.noise.state_noise_variance = 1e-3;
        let q = JointConfig::new(vec![0.7]);
        let y = DVector::from_column_slice(p.model.position(&p.state.mean, &q).unwrap().as_slice());
        let post = rls_update(&p.state, &p.model, &q, &y, &p.noise).unwrap();
        let cost = lookahead_cost(&p, &q).unwrap();
        assert!((cost - post.trace()).abs() < 1e-12 * post.trace());
        assert_eq!(post.mean, p.state.mean);
    }

    #[test]
    fn outside_limits_rejected() {
        let p = one_joint([-0.5, 0.5]);
        assert!(lookahead_cost(&p, &JointConfig::new(vec![0.6])).is_err());
    }

    #[test]
    fn impossible_fov_gives_flat_cost() {
        let mut p = one_joint([-0.5, 0.5]);
        p.fov = Some(FieldOfView {
            camera: [0.0, 0.0, 1.0],
            axis: [0.0, 0.0, -1.0],
            half_angle: 0.0,
            min_depth: 0.0,
            max_depth: 10.0,
        });
        let res = select_next(&p).unwrap();
        assert!((res.cost - 2.0 * p.state.trace()).abs() < 1e-15);
        assert_eq!(res.config.angles, vec![0.0]);
    }

    #[test]
    fn prefers_the_far_limit() {
        let p = one_joint([0.0, 1.2]);
        let res = select_next(&p).unwrap();
        assert!(res.config.angles[0] > 1.2 - 0.05);
        assert!(res.evaluations <= 60);
        let again = lookahead_cost(&p, &res.config).unwrap();
        assert_eq!(again, res.cost);
    }

    #[test]
    fn excluded_neighbourhood_is_uninformative() {
        let mut p = one_joint([0.0, 1.2]);
        let first = select_next(&p).unwrap();
        p.excluded.push(first.config.clone());
        p.exclusion_radius = 0.1;
        let uninformative = 2.0 * p.state.trace();
        assert_eq!(lookahead_cost(&p, &first.config).unwrap(), uninformative);
        let second = select_next(&p).unwrap();
        assert!((second.config.angles[0] - first.config.angles[0]).abs() > 0.1);
        assert!(second.cost < uninformative);
    }

    #[test]
    fn dimension_checks() {
        let mut p = one_joint([-0.5, 0.5]);
        p.joint_limits = JointLimits::symmetric(2, 0.5).unwrap();
        assert!(select_next(&p).is_err());
    }
}
