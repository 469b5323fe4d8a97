//! Scenario execution: plays scripted trajectories through the sensor models
//! and collects a time-ordered log.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sensors::{raycast_against, sample_odometry, sample_uwb};
use super::{OdomIncrement, SensorConfig, SensorLog, SimError};
use crate::geometry::{Point2, Pose2};
use crate::sim::WorldMap;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs a scripted scenario and returns its sensor log.
///
/// The robot carries the LiDAR and one UWB node; the object carries the other
/// UWB node and appears to the LiDAR as a circle of `object_radius`. Both
/// trajectories must supply one pose per tick. The log is fully determined by
/// the inputs, including the seed.
pub fn run_scenario(
    world: &WorldMap,
    robot_traj: &[Pose2],
    object_traj: &[Pose2],
    object_radius: f64,
    cfg: &SensorConfig,
) -> Result<SensorLog, SimError> {
    cfg.validate()?;
    if robot_traj.is_empty() {
        return Err(SimError::InvalidScenario("empty trajectory".into()));
    }
    if robot_traj.len() != object_traj.len() {
        return Err(SimError::InvalidScenario(format!(
            "trajectory lengths differ: robot {} vs object {}",
            robot_traj.len(),
            object_traj.len()
        )));
    }
    if !(object_radius > 0.0) {
        return Err(SimError::InvalidScenario("object radius must be positive".into()));
    }
    let ticks = robot_traj.len();
    world.validate(ticks)?;
    for (name, traj) in [("robot", robot_traj), ("object", object_traj)] {
        if let Some(t) = traj.iter().position(|p| !world.contains(&p.position())) {
            return Err(SimError::InvalidScenario(format!(
                "{name} trajectory leaves the world bounds at tick {t}"
            )));
        }
    }

    // Independent per-sensor streams: rate divisors on one sensor must not
    // shift the draws of another.
    let mut rng_lidar = stream_rng(cfg.rng_seed, 1);
    let mut rng_uwb = stream_rng(cfg.rng_seed, 2);
    let mut rng_odom_r = stream_rng(cfg.rng_seed, 3);
    let mut rng_odom_o = stream_rng(cfg.rng_seed, 4);

    let mut log = SensorLog {
        ticks,
        config: cfg.clone(),
        truth_robot: robot_traj.to_vec(),
        truth_object: object_traj.to_vec(),
        scans: Vec::new(),
        ranges: Vec::new(),
        odom_robot: Vec::new(),
        odom_object: Vec::new(),
    };

    for t in 0..ticks {
        if t % cfg.lidar_rate_divisor == 0 {
            let mut circles: Vec<(Point2, f64)> = world
                .dynamic
                .iter()
                .map(|d| (d.positions[t], d.radius))
                .collect();
            circles.push((object_traj[t].position(), object_radius));
            log.scans.push(raycast_against(
                &world.walls,
                &circles,
                &robot_traj[t],
                cfg,
                t,
                &mut rng_lidar,
            ));
        }
        if t % cfg.uwb_rate_divisor == 0 {
            log.ranges.push(sample_uwb(
                world,
                &robot_traj[t],
                &object_traj[t],
                cfg,
                t,
                &mut rng_uwb,
            ));
        }
        if t > 0 && t % cfg.odom_rate_divisor == 0 {
            let prev = t - cfg.odom_rate_divisor;
            log.odom_robot.push(sample_odometry(
                &robot_traj[prev],
                &robot_traj[t],
                cfg,
                t,
                &mut rng_odom_r,
            ));
            log.odom_object.push(sample_odometry(
                &object_traj[prev],
                &object_traj[t],
                cfg,
                t,
                &mut rng_odom_o,
            ));
        }
    }
    Ok(log)
}

/// Dead-reckons a trajectory by composing odometry increments from a start
/// pose. Used both for graph initialization and as the pure-odometry
/// baseline.
pub fn dead_reckon(start: Pose2, increments: &[OdomIncrement]) -> Vec<(usize, Pose2)> {
    let mut out = vec![(0, start)];
    let mut pose = start;
    for inc in increments {
        pose = pose.compose(&inc.delta);
        out.push((inc.t, pose));
    }
    out
}
