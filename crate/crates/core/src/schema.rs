//! Chain definition files (TOML).
//!
//! ```toml
//! name = "two_link"                   # optional
//! # one row per joint: wx wy wz vx vy vz
//! twists = [
//!   [0.0, 0.0, 1.0, 0.0,  0.0, 0.0],
//!   [0.0, 0.0, 1.0, 0.0, -0.3, 0.0],
//! ]
//! # zero-configuration end-effector pose: rotation row-major, then translation
//! zero_pose = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.55, 0.0, 0.0]
//!
//! # optional, used when the file describes a simulated ground truth
//! joint_limits = [[-0.698, 0.698], [-0.698, 0.698]]
//! obs_variance = 1e-4
//!
//! [fov]                                # optional; absent = everything visible
//! camera = [0.3, 0.0, 1.0]
//! axis = [0.0, 0.0, -1.0]
//! half_angle = 0.6
//! min_depth = 0.2
//! max_depth = 2.0
//! ```

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fov::FieldOfView;
use crate::kinematics::{ChainParams, JointLimits, Pose, Twist};
use crate::sim::{GroundTruth, DEFAULT_JOINT_RANGE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub twists: Vec<[f64; 6]>,
    pub zero_pose: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_limits: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<FieldOfView>,
}

impl ChainDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.chain()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("chain document serializes")
    }

    pub fn chain(&self) -> Result<ChainParams> {
        check_dim("zero_pose entries", 12, self.zero_pose.len())?;
        let zero_pose = Pose::from_row_major12(&self.zero_pose)?;
        let twists = self
            .twists
            .iter()
            .map(|t| Twist::new(Vector3::new(t[0], t[1], t[2]), Vector3::new(t[3], t[4], t[5])))
            .collect();
        ChainParams::new(twists, zero_pose)
    }

    /// Ground truth with ±40° limits and `default_obs_variance` where the file is silent.
    pub fn ground_truth(&self, default_obs_variance: f64) -> Result<GroundTruth> {
        let params = self.chain()?;
        let joint_limits = match &self.joint_limits {
            Some(b) => JointLimits::new(b.clone())?,
            None => JointLimits::symmetric(params.joints(), DEFAULT_JOINT_RANGE)?,
        };
        let gt = GroundTruth {
            name: self.name.clone().unwrap_or_else(|| "custom".to_string()),
            params,
            joint_limits,
            fov: self.fov,
            obs_variance: self.obs_variance.unwrap_or(default_obs_variance),
        };
        gt.validate()?;
        Ok(gt)
    }

    pub fn from_chain(params: &ChainParams) -> Self {
        Self {
            name: None,
            twists: params
                .twists
                .iter()
                .map(|t| [t.w[0], t.w[1], t.w[2], t.v[0], t.v[1], t.v[2]])
                .collect(),
            zero_pose: params.zero_pose.to_row_major12().to_vec(),
            joint_limits: None,
            obs_variance: None,
            fov: None,
        }
    }

    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        Self {
            name: Some(gt.name.clone()),
            joint_limits: Some(gt.joint_limits.bounds.clone()),
            obs_variance: Some(gt.obs_variance),
            fov: gt.fov,
            ..Self::from_chain(&gt.params)
        }
    }
}
