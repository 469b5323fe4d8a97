//! Deterministic synthetic arena standing in for a physical experiment:
//! ground-truth trajectories, ray-cast LiDAR scans, noisy UWB ranges with
//! optional non-line-of-sight bias, and drifting odometry.
//!
//! Everything is driven by a single global tick clock. Each sensor emits at
//! its own rate divisor, and every random draw comes from a per-sensor
//! ChaCha stream derived from the scenario seed, so a scenario is fully
//! reproducible: equal inputs give byte-identical logs.

mod log;
mod scenario;
mod sensors;
mod world;

pub use log::SensorLog;
pub use scenario::{dead_reckon, run_scenario};
pub use sensors::{raycast_scan, sample_odometry, sample_uwb, segments_intersect};
pub use world::{expand_path, DynamicObstacle, PathSpec, Segment, WorldMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid sensor config: {0}")]
    InvalidSensorConfig(String),
    #[error("log parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Sensor rates, noise magnitudes, and the scenario seed.
///
/// Rate divisors are in ticks: a divisor of `d` emits at every tick that is a
/// multiple of `d` (odometry starts at the first multiple after tick 0, since
/// an increment needs a predecessor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// LiDAR angular step between rays, radians.
    pub lidar_angular_resolution: f64,
    pub lidar_max_range: f64,
    pub lidar_range_noise_sigma: f64,
    pub lidar_rate_divisor: usize,
    pub uwb_noise_sigma: f64,
    /// Additive range bias applied when the robot-object segment is blocked.
    pub uwb_nlos_bias: f64,
    pub uwb_rate_divisor: usize,
    pub odom_trans_noise_sigma: f64,
    pub odom_rot_noise_sigma: f64,
    pub odom_rate_divisor: usize,
    pub rng_seed: u64,
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidSensorConfig(msg.into()));
        if !(self.lidar_angular_resolution > 0.0) {
            return bad("lidar_angular_resolution must be > 0");
        }
        if !(self.lidar_max_range > 0.0) {
            return bad("lidar_max_range must be > 0");
        }
        for (name, v) in [
            ("lidar_range_noise_sigma", self.lidar_range_noise_sigma),
            ("uwb_noise_sigma", self.uwb_noise_sigma),
            ("uwb_nlos_bias", self.uwb_nlos_bias),
            ("odom_trans_noise_sigma", self.odom_trans_noise_sigma),
            ("odom_rot_noise_sigma", self.odom_rot_noise_sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SimError::InvalidSensorConfig(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        if self.lidar_rate_divisor == 0 || self.uwb_rate_divisor == 0 || self.odom_rate_divisor == 0
        {
            return bad("rate divisors must be >= 1");
        }
        Ok(())
    }
}

/// One UWB range sample. The `los` flag is ground truth carried along for
/// analysis; the estimation pipeline never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub t: usize,
    pub range: f64,
    pub los: bool,
}

/// One odometry increment: relative motion in the agent's body frame at the
/// earlier of the two ticks it spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdomIncrement {
    pub t: usize,
    pub delta: Pose2,
}
