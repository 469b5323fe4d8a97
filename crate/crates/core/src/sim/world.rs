//! Arena geometry and scripted trajectories.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Point2, Pose2};

/// A static wall segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Segment {
            a: Point2::new(ax, ay),
            b: Point2::new(bx, by),
        }
    }
}

/// A scripted circular obstacle with a position per simulation tick.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObstacle {
    pub radius: f64,
    pub positions: Vec<Point2>,
}

/// The arena: rectangular bounds `[0, width] x [0, height]`, static wall
/// segments, and scripted dynamic obstacles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldMap {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Segment>,
    pub dynamic: Vec<DynamicObstacle>,
}

impl WorldMap {
    pub fn empty(width: f64, height: f64) -> Self {
        WorldMap {
            width,
            height,
            walls: Vec::new(),
            dynamic: Vec::new(),
        }
    }

    /// The four boundary wall segments of the bounds rectangle.
    pub fn boundary_walls(width: f64, height: f64) -> Vec<Segment> {
        vec![
            Segment::new(0.0, 0.0, width, 0.0),
            Segment::new(width, 0.0, width, height),
            Segment::new(width, height, 0.0, height),
            Segment::new(0.0, height, 0.0, 0.0),
        ]
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Checks that all obstacle geometry lies within bounds and that every
    /// dynamic obstacle is scripted for at least `ticks` ticks.
    pub fn validate(&self, ticks: usize) -> Result<(), SimError> {
        if !(self.width > 0.0) || !(self.height > 0.0) {
            return Err(SimError::InvalidScenario("world bounds must be positive".into()));
        }
        for (i, w) in self.walls.iter().enumerate() {
            if !self.contains(&w.a) || !self.contains(&w.b) {
                return Err(SimError::InvalidScenario(format!(
                    "wall {i} extends outside the world bounds"
                )));
            }
        }
        for (i, d) in self.dynamic.iter().enumerate() {
            if !(d.radius > 0.0) {
                return Err(SimError::InvalidScenario(format!(
                    "dynamic obstacle {i} must have a positive radius"
                )));
            }
            if d.positions.len() < ticks {
                return Err(SimError::InvalidScenario(format!(
                    "dynamic obstacle {i} is scripted for {} ticks, scenario needs {ticks}",
                    d.positions.len()
                )));
            }
            for p in &d.positions[..ticks] {
                if p.x - d.radius < 0.0
                    || p.x + d.radius > self.width
                    || p.y - d.radius < 0.0
                    || p.y + d.radius > self.height
                {
                    return Err(SimError::InvalidScenario(format!(
                        "dynamic obstacle {i} leaves the world bounds"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A waypoint path traversed at constant speed over the scenario duration.
///
/// With no waypoints (or `laps <= 0`) the agent stays at `start`. Otherwise
/// the polyline runs from `start` through the waypoints; `closed` loops back
/// to the start, an open path is traversed back and forth. `laps` is the
/// number of full traversals over the scenario, and need not be integral.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub start: Pose2,
    pub waypoints: Vec<Point2>,
    pub closed: bool,
    pub laps: f64,
}

impl PathSpec {
    pub fn stationary(start: Pose2) -> Self {
        PathSpec {
            start,
            waypoints: Vec::new(),
            closed: false,
            laps: 0.0,
        }
    }
}

/// Expands a path into one pose per tick. Heading is the direction of the
/// polyline segment being traversed (the start heading while stationary).
pub fn expand_path(spec: &PathSpec, ticks: usize) -> Vec<Pose2> {
    assert!(ticks > 0, "scenario needs at least one tick");
    if spec.waypoints.is_empty() || spec.laps <= 0.0 || ticks == 1 {
        return vec![spec.start; ticks];
    }

    let mut vertices = vec![spec.start.position()];
    vertices.extend(spec.waypoints.iter().copied());
    if spec.closed {
        vertices.push(spec.start.position());
    }
    let mut cumulative = vec![0.0];
    for pair in vertices.windows(2) {
        cumulative.push(cumulative.last().unwrap() + pair[0].distance(&pair[1]));
    }
    let length = *cumulative.last().unwrap();
    if length <= 0.0 {
        return vec![spec.start; ticks];
    }

    let total = spec.laps * length;
    (0..ticks)
        .map(|t| {
            let s = total * t as f64 / (ticks - 1) as f64;
            let (s, reversed) = if spec.closed {
                (s % length, false)
            } else {
                // ping-pong an open path
                let u = s % (2.0 * length);
                if u <= length {
                    (u, false)
                } else {
                    (2.0 * length - u, true)
                }
            };
            // Segment being traversed; land exactly on the final vertex at
            // the path end rather than wrapping to segment 0.
            let s = s.min(length * (1.0 - 1e-12));
            let seg = match cumulative[1..].iter().position(|&c| s < c) {
                Some(i) => i,
                None => vertices.len() - 2,
            };
            let p0 = vertices[seg];
            let p1 = vertices[seg + 1];
            let seg_len = cumulative[seg + 1] - cumulative[seg];
            let frac = if seg_len > 0.0 {
                (s - cumulative[seg]) / seg_len
            } else {
                0.0
            };
            let x = p0.x + frac * (p1.x - p0.x);
            let y = p0.y + frac * (p1.y - p0.y);
            let mut heading = (p1.y - p0.y).atan2(p1.x - p0.x);
            if reversed {
                heading = crate::geometry::wrap_angle(heading + std::f64::consts::PI);
            }
            Pose2::new(x, y, heading)
        })
        .collect()
}
