//! Moving-object localization workbench: a deterministic 2D simulator, a
//! LiDAR object-identification pipeline with UWB gating, moving-direction
//! estimation with outlier rejection, and pose-graph fusion of odometry, UWB
//! ranging, and LiDAR measurements.
//!
//! The crate is organized around the data flow:
//!
//! * [`geometry`] — SE(2) poses, points, angle arithmetic.
//! * [`sim`] — synthetic arena: ray-cast LiDAR, noisy UWB ranges with NLOS
//!   bias, drifting odometry, deterministic scenario logs.
//! * [`identify`] — adaptive clustering of scans, dynamic-cluster detection
//!   across successive scans, UWB range gating.
//! * [`direction`] — object moving-direction estimation and the
//!   information-weight outlier gate.
//! * [`graph`] — pose graph with five constraint types and a
//!   Levenberg-Marquardt solver.
//! * [`pipeline`] — per-tick fusion of a sensor log into the graph.
//! * [`eval`] — approach toggles, relative-error metrics, parameter sweeps,
//!   CSV/JSONL export.
//! * [`config`] — scenario files (TOML) and the built-in scenarios.

pub mod config;
pub mod direction;
pub mod eval;
pub mod geometry;
pub mod graph;
pub mod identify;
pub mod pipeline;
pub mod sim;

pub use geometry::{angle_diff, wrap_angle, Point2, Pose2};
