//! Online calibration of a robot's kinematic chain from end-effector
//! position measurements.
//!
//! The chain is a product of exponentials of joint twists. Its parameters are
//! estimated by recursive least squares, and the next joint configuration can
//! be chosen to minimize the expected posterior covariance trace, searched
//! with DIRECT.

pub mod active;
pub mod direct;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fov;
pub mod kinematics;
pub mod schema;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{EstimatorState, NoiseConfig, ObservationModel};
pub use kinematics::{ChainModel, ChainParams, JointConfig, JointLimits, Pose, Twist};
