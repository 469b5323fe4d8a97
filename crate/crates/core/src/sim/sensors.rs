//! Sensor models: ray-cast LiDAR, UWB ranging with NLOS bias, odometry drift.

use rand::Rng;
use rand_distr::StandardNormal;

use super::world::{Segment, WorldMap};
use super::{OdomIncrement, RangeMeasurement, SensorConfig};
use crate::geometry::{wrap_angle, Point2, Pose2};
use crate::identify::PointCloud;

/// Distance along the ray `origin + t * dir` to the segment, if it hits.
fn ray_segment(origin: &Point2, dir: (f64, f64), seg: &Segment) -> Option<f64> {
    let vx = seg.b.x - seg.a.x;
    let vy = seg.b.y - seg.a.y;
    let det = dir.1 * vx - dir.0 * vy;
    if det.abs() < 1e-15 {
        return None; // parallel
    }
    let px = seg.a.x - origin.x;
    let py = seg.a.y - origin.y;
    let t = (py * vx - px * vy) / det;
    let s = (dir.0 * py - dir.1 * px) / det;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray to a circle boundary, if it hits.
fn ray_circle(origin: &Point2, dir: (f64, f64), center: &Point2, radius: f64) -> Option<f64> {
    let ox = origin.x - center.x;
    let oy = origin.y - center.y;
    let b = dir.0 * ox + dir.1 * oy;
    let c = ox * ox + oy * oy - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let near = -b - sq;
    if near >= 0.0 {
        Some(near)
    } else {
        let far = -b + sq;
        (far >= 0.0).then_some(far)
    }
}

/// Casts one full revolution of rays from `sensor_pose` against walls plus
/// the given circles, returning body-frame hit points with range noise.
pub(crate) fn raycast_against<R: Rng>(
    walls: &[Segment],
    circles: &[(Point2, f64)],
    sensor_pose: &Pose2,
    cfg: &SensorConfig,
    t: usize,
    rng: &mut R,
) -> PointCloud {
    let step = cfg.lidar_angular_resolution;
    let n_rays = (std::f64::consts::TAU / step).round().max(1.0) as usize;
    let origin = sensor_pose.position();
    let mut points = Vec::new();
    for k in 0..n_rays {
        let body_angle = k as f64 * step;
        let world_angle = sensor_pose.theta + body_angle;
        let dir = (world_angle.cos(), world_angle.sin());
        let mut nearest = f64::INFINITY;
        for w in walls {
            if let Some(d) = ray_segment(&origin, dir, w) {
                nearest = nearest.min(d);
            }
        }
        for (c, r) in circles {
            if let Some(d) = ray_circle(&origin, dir, c, *r) {
                nearest = nearest.min(d);
            }
        }
        if nearest > cfg.lidar_max_range {
            continue;
        }
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.lidar_range_noise_sigma;
        let range = (nearest + noise).clamp(0.0, cfg.lidar_max_range);
        let (s, c) = body_angle.sin_cos();
        points.push(Point2::new(range * c, range * s));
    }
    PointCloud { t, points }
}

/// One LiDAR revolution against the world's static walls and its dynamic
/// obstacles at tick `t`. Points are in the sensor body frame; rays that hit
/// nothing within range produce no point.
pub fn raycast_scan<R: Rng>(
    world: &WorldMap,
    sensor_pose: &Pose2,
    cfg: &SensorConfig,
    t: usize,
    rng: &mut R,
) -> PointCloud {
    let circles: Vec<(Point2, f64)> = world
        .dynamic
        .iter()
        .map(|d| (d.positions[t.min(d.positions.len() - 1)], d.radius))
        .collect();
    raycast_against(&world.walls, &circles, sensor_pose, cfg, t, rng)
}

/// Proper segment intersection test used for the UWB line-of-sight check.
pub fn segments_intersect(a: &Segment, b: &Segment) -> bool {
    let d1 = (a.b.x - a.a.x, a.b.y - a.a.y);
    let d2 = (b.b.x - b.a.x, b.b.y - b.a.y);
    let det = d1.0 * d2.1 - d1.1 * d2.0;
    if det.abs() < 1e-15 {
        return false; // parallel or collinear: treated as not blocking
    }
    let px = b.a.x - a.a.x;
    let py = b.a.y - a.a.y;
    let t = (px * d2.1 - py * d2.0) / det;
    let s = (px * d1.1 - py * d1.0) / det;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s)
}

/// Samples a UWB range between the robot and the object. Line of sight is
/// blocked when any static wall crosses the direct segment; blocked ranges
/// get the additive NLOS bias (always longer, never shorter).
pub fn sample_uwb<R: Rng>(
    world: &WorldMap,
    robot_pose: &Pose2,
    object_pose: &Pose2,
    cfg: &SensorConfig,
    t: usize,
    rng: &mut R,
) -> RangeMeasurement {
    let direct = Segment {
        a: robot_pose.position(),
        b: object_pose.position(),
    };
    let los = !world.walls.iter().any(|w| segments_intersect(&direct, w));
    let truth = robot_pose.position().distance(&object_pose.position());
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.uwb_noise_sigma;
    let bias = if los { 0.0 } else { cfg.uwb_nlos_bias };
    RangeMeasurement {
        t,
        range: (truth + noise + bias).max(0.0),
        los,
    }
}

/// Samples a noisy odometry increment between two ground-truth poses:
/// Gaussian noise on the body-frame translation, wrapped Gaussian noise on
/// the rotation. Noise models wheel slip, so it only applies while the
/// agent actually moves; a stationary agent reports an exact identity
/// increment. The draws happen either way to keep the stream layout fixed.
pub fn sample_odometry<R: Rng>(
    true_prev: &Pose2,
    true_curr: &Pose2,
    cfg: &SensorConfig,
    t: usize,
    rng: &mut R,
) -> OdomIncrement {
    let exact = true_prev.relative_to(true_curr);
    let nx: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.odom_trans_noise_sigma;
    let ny: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.odom_trans_noise_sigma;
    let nt: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.odom_rot_noise_sigma;
    let moved = exact.x.hypot(exact.y) > 1e-12 || exact.theta.abs() > 1e-12;
    let delta = if moved {
        Pose2::new(exact.x + nx, exact.y + ny, wrap_angle(exact.theta + nt))
    } else {
        exact
    };
    OdomIncrement { t, delta }
}
