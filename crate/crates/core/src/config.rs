//! Scenario configuration files and the built-in scenarios.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! ticks = 500
//!
//! [world]
//! width = 16.0
//! height = 12.0
//! boundary_walls = true          # add the four bounding walls
//! walls = [[6.5, 5.7, 6.5, 6.3]] # interior segments, [ax, ay, bx, by]
//!
//! [[world.dynamic_obstacles]]    # scripted circular obstacles
//! radius = 0.3
//! waypoints = [[8.25, 2.0], [8.25, 10.0]]
//! closed = false                 # open paths ping-pong, closed paths loop
//! laps = 3.0                     # traversals over the scenario duration
//!
//! [robot]
//! start = [5.5, 6.0, 0.0]        # x, y, theta; waypoints optional
//!
//! [object]
//! start = [6.0, 3.5, 0.0]
//! radius = 0.2                   # LiDAR footprint of the object
//! waypoints = [[10.5, 3.5], [10.5, 8.5], [6.0, 8.5]]
//! closed = true
//! laps = 2.0
//!
//! [sensors]                      # see `sim::SensorConfig`; all fields
//! lidar_angular_resolution = 0.0125
//! # ...
//! rng_seed = 17
//!
//! [pipeline]                     # optional; estimation parameters
//! vartheta = 0.3
//! omega = 10000.0
//! window = 0                     # 0 = optimize the whole graph every tick
//! gate_drops_position = true     # rejection drops the whole measurement
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::GateParams;
use crate::geometry::{Point2, Pose2};
use crate::graph::SolverOptions;
use crate::identify::IdentifyParams;
use crate::pipeline::PipelineParams;
use crate::sim::{
    expand_path, run_scenario, DynamicObstacle, PathSpec, SensorConfig, SensorLog, Segment,
    SimError, WorldMap,
};

/// Built-in scenario mirroring the static-robot experiment: the robot sits
/// still while the object loops the arena past an occluding wall and a
/// moving distractor.
pub const STATIC_ROBOT_TOML: &str = include_str!("../scenarios/static_robot.toml");

/// Built-in scenario with both the robot and the object moving.
pub const MOVING_ROBOT_TOML: &str = include_str!("../scenarios/moving_robot.toml");

/// Looks up a built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    match name {
        "static-robot" => Some(STATIC_ROBOT_TOML),
        "moving-robot" => Some(MOVING_ROBOT_TOML),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub ticks: usize,
    pub world: WorldSection,
    pub robot: AgentSection,
    pub object: ObjectSection,
    pub sensors: SensorConfig,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_true")]
    pub boundary_walls: bool,
    #[serde(default)]
    pub walls: Vec<[f64; 4]>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSection {
    pub radius: f64,
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default = "default_one")]
    pub laps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub start: [f64; 3],
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub laps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub start: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub laps: f64,
}

/// Estimation parameters exposed in the scenario file. Every field has the
/// workbench default; `window = 0` means unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub vartheta: f64,
    pub omega: f64,
    pub min_displacement: f64,
    pub match_tolerance: f64,
    pub min_cluster_size: usize,
    pub band_edges: Vec<f64>,
    pub motion_threshold: f64,
    pub association_radius: f64,
    pub window: usize,
    pub max_iters: usize,
    pub huber_delta: Option<f64>,
    pub gate_drops_position: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let gate = GateParams::default();
        let idp = IdentifyParams::defaults(1.0);
        PipelineSection {
            vartheta: gate.vartheta,
            omega: gate.omega,
            min_displacement: gate.min_displacement,
            match_tolerance: idp.match_tolerance,
            min_cluster_size: idp.min_cluster_size,
            band_edges: idp.band_edges,
            motion_threshold: idp.motion_threshold,
            association_radius: idp.association_radius,
            window: 0,
            max_iters: SolverOptions::default().max_iters,
            huber_delta: None,
            gate_drops_position: false,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

/// A fully expanded scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub ticks: usize,
    pub world: WorldMap,
    pub robot_traj: Vec<Pose2>,
    pub object_traj: Vec<Pose2>,
    pub object_radius: f64,
    pub sensors: SensorConfig,
    pub pipeline: PipelineParams,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Expands trajectories, assembles the world, and validates everything.
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        if self.ticks == 0 {
            return Err(ConfigError::Invalid("ticks must be >= 1".into()));
        }
        let mut walls: Vec<Segment> = Vec::new();
        if self.world.boundary_walls {
            walls.extend(WorldMap::boundary_walls(self.world.width, self.world.height));
        }
        walls.extend(
            self.world
                .walls
                .iter()
                .map(|w| Segment::new(w[0], w[1], w[2], w[3])),
        );
        let dynamic = self
            .world
            .dynamic_obstacles
            .iter()
            .map(|d| {
                if d.waypoints.is_empty() {
                    return Err(ConfigError::Invalid(
                        "dynamic obstacles need at least one waypoint".into(),
                    ));
                }
                let start = Pose2::new(d.waypoints[0][0], d.waypoints[0][1], 0.0);
                let spec = PathSpec {
                    start,
                    waypoints: d.waypoints[1..]
                        .iter()
                        .map(|w| Point2::new(w[0], w[1]))
                        .collect(),
                    closed: d.closed,
                    laps: d.laps,
                };
                Ok(DynamicObstacle {
                    radius: d.radius,
                    positions: expand_path(&spec, self.ticks)
                        .into_iter()
                        .map(|p| p.position())
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let world = WorldMap {
            width: self.world.width,
            height: self.world.height,
            walls,
            dynamic,
        };

        let agent_path = |start: &[f64; 3], waypoints: &[[f64; 2]], closed: bool, laps: f64| {
            expand_path(
                &PathSpec {
                    start: Pose2::new(start[0], start[1], start[2]),
                    waypoints: waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect(),
                    closed,
                    laps,
                },
                self.ticks,
            )
        };
        let robot_traj = agent_path(
            &self.robot.start,
            &self.robot.waypoints,
            self.robot.closed,
            self.robot.laps,
        );
        let object_traj = agent_path(
            &self.object.start,
            &self.object.waypoints,
            self.object.closed,
            self.object.laps,
        );

        let p = &self.pipeline;
        let identify = IdentifyParams {
            angular_resolution: self.sensors.lidar_angular_resolution,
            band_edges: p.band_edges.clone(),
            min_cluster_size: p.min_cluster_size,
            motion_threshold: p.motion_threshold,
            association_radius: p.association_radius,
            match_tolerance: p.match_tolerance,
        };
        identify.validate().map_err(ConfigError::Invalid)?;
        let gate = GateParams {
            vartheta: p.vartheta,
            omega: p.omega,
            min_displacement: p.min_displacement,
        };
        gate.validate().map_err(ConfigError::Invalid)?;
        let pipeline = PipelineParams {
            identify,
            gate,
            window: (p.window > 0).then_some(p.window),
            solver: SolverOptions {
                max_iters: p.max_iters,
                huber_delta: p.huber_delta,
                ..Default::default()
            },
            gate_drops_position: p.gate_drops_position,
            ..Default::default()
        };

        self.sensors.validate()?;
        world.validate(self.ticks)?;

        Ok(Scenario {
            ticks: self.ticks,
            world,
            robot_traj,
            object_traj,
            object_radius: self.object.radius,
            sensors: self.sensors.clone(),
            pipeline,
        })
    }
}

impl Scenario {
    /// Parses and builds in one step.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        ScenarioFile::parse(text)?.build()
    }

    /// Replaces the scenario seed (CLI `--seed` override).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sensors.rng_seed = seed;
        self
    }

    /// Runs the simulator over the scripted trajectories.
    pub fn simulate(&self) -> Result<SensorLog, ConfigError> {
        Ok(run_scenario(
            &self.world,
            &self.robot_traj,
            &self.object_traj,
            self.object_radius,
            &self.sensors,
        )?)
    }
}
