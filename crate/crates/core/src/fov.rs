//! Sphere-sector visibility predicate for the external position sensor.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point is visible when its distance to the camera lies in
/// `[min_depth, max_depth]` and the angle between the viewing axis and the
/// ray to the point is strictly below `half_angle`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldOfView {
    pub camera: [f64; 3],
    /// Viewing direction; need not be unit.
    pub axis: [f64; 3],
    /// Radians.
    pub half_angle: f64,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl FieldOfView {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .camera
            .iter()
            .chain(&self.axis)
            .chain([&self.half_angle, &self.min_depth, &self.max_depth])
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("field of view parameters must be finite"));
        }
        if Vector3::from(self.axis).norm() == 0.0 {
            return Err(invalid("field of view axis must be non-zero"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.half_angle) {
            return Err(invalid("field of view half-angle must lie in [0, pi]"));
        }
        if !(0.0 <= self.min_depth && self.min_depth <= self.max_depth) {
            return Err(invalid("field of view depth range must satisfy 0 <= min <= max"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let ray = p - Vector3::from(self.camera);
        let depth = ray.norm();
        if !(depth > 0.0 && self.min_depth <= depth && depth <= self.max_depth) {
            return false;
        }
        let axis = Vector3::from(self.axis);
        let angle = ray.cross(&axis).norm().atan2(ray.dot(&axis));
        angle < self.half_angle
    }
}

/// `None` means the whole space is visible.
pub fn visible(fov: Option<&FieldOfView>, p: &Vector3<f64>) -> bool {
    fov.is_none_or(|f| f.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn down(half_angle: f64) -> FieldOfView {
        FieldOfView {
            camera: [0.0, 0.0, 1.0],
            axis: [0.0, 0.0, -1.0],
            half_angle,
            min_depth: 0.5,
            max_depth: 1.5,
        }
    }

    #[test]
    fn sector_membership() {
        let f = down(0.5);
        assert!(f.contains(&Vector3::new(0.0, 0.0, 0.0)));
        assert!(f.contains(&Vector3::new(0.3, 0.0, 0.0)));
        // atan(0.6) > 0.5
        assert!(!f.contains(&Vector3::new(0.6, 0.0, 0.0)));
        // too close, too far
        assert!(!f.contains(&Vector3::new(0.0, 0.0, 0.8)));
        assert!(!f.contains(&Vector3::new(0.0, 0.0, -0.6)));
        assert!(visible(None, &Vector3::new(1e9, 0.0, 0.0)));
    }

    #[test]
    fn zero_half_angle_sees_nothing() {
        let f = down(0.0);
        assert!(!f.contains(&Vector3::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn validation() {
        assert!(down(0.5).validate().is_ok());
        assert!(down(-0.1).validate().is_err());
        let mut f = down(0.5);
        f.axis = [0.0; 3];
        assert!(f.validate().is_err());
        f = down(0.5);
        f.min_depth = 2.0;
        assert!(f.validate().is_err());
    }
}
