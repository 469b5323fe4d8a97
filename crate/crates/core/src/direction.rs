//! Object moving-direction estimation from successive detections, and the
//! heuristic information-weight gate that rejects suspicious directions.
//!
//! The gate compares the estimated moving direction against the object's
//! current orientation estimate from pose-graph optimization: within the
//! threshold the direction edge gets a high information weight, otherwise
//! zero. The comparison uses the wrapped angle difference, so directions on
//! opposite sides of the ±π seam are still recognized as close.

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff, wrap_angle, Point2};

/// Gate parameters: threshold ϑ (radians), trusted weight ω, and the minimum
/// displacement below which no direction is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub vartheta: f64,
    pub omega: f64,
    pub min_displacement: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            vartheta: 0.3,
            omega: 10_000.0,
            min_displacement: 0.02,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.vartheta > 0.0) {
            return Err("vartheta must be > 0".into());
        }
        if !(self.omega > 0.0) {
            return Err("omega must be > 0".into());
        }
        if !(self.min_displacement >= 0.0) {
            return Err("min_displacement must be >= 0".into());
        }
        Ok(())
    }
}

/// A detection promoted to a pose measurement: position plus, when two
/// successive detections exist and the object moved far enough, a moving
/// direction with its gated information weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarObjectPose {
    pub t: usize,
    /// Object position in the robot body frame.
    pub position: Point2,
    /// Moving direction, absent below the displacement floor or without a
    /// previous detection.
    pub direction: Option<f64>,
    /// ω when the gate accepted the direction, 0 when it rejected it (or no
    /// direction exists).
    pub direction_weight: f64,
}

/// Moving direction from two successive world-frame positions:
/// `atan2(y_curr - y_prev, x_curr - x_prev)`. Returns `None` when the
/// displacement is under `min_displacement`, where the angle is dominated by
/// position noise.
pub fn moving_direction(prev: &Point2, curr: &Point2, min_displacement: f64) -> Option<f64> {
    if prev.distance(curr) < min_displacement {
        return None;
    }
    Some(wrap_angle((curr.y - prev.y).atan2(curr.x - prev.x)))
}

/// Information weight for a direction measurement: ω when the wrapped
/// difference to the current PGO orientation estimate is within ϑ
/// (inclusive), 0 otherwise.
pub fn gate(direction: f64, theta_pgo: f64, params: &GateParams) -> f64 {
    if angle_diff(direction, theta_pgo).abs() <= params.vartheta {
        params.omega
    } else {
        0.0
    }
}
