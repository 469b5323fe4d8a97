//! Pose graph over robot and object trajectories with five constraint types:
//! robot odometry, object odometry, UWB range, LiDAR-detected object position
//! (in the robot body frame), and LiDAR-estimated moving direction.
//!
//! Nodes are SE(2) poses indexed by `(agent, tick)`. Edges carry a
//! measurement and an information (inverse-covariance) weight; zero
//! information contributes nothing to the objective. Gauge freedom is removed
//! by fixing anchor nodes before optimization.
//!
//! # Text format
//!
//! Graphs serialize to a line-based format, one record per line, fields
//! separated by single spaces, floats in shortest round-trip notation:
//!
//! ```text
//! VERTEX <agent> <t> <x> <y> <theta>
//! FIX <agent> <t>
//! EDGE robot_odom <t_from> <t_to> <dx> <dy> <dtheta> <i11> <i12> <i13> <i22> <i23> <i33>
//! EDGE object_odom <t_from> <t_to> <dx> <dy> <dtheta> <i11> <i12> <i13> <i22> <i23> <i33>
//! EDGE uwb_range <t_robot> <t_object> <range> <info>
//! EDGE lidar_position <t_robot> <t_object> <zx> <zy> <i11> <i12> <i22>
//! EDGE lidar_direction <t_object> <theta> <info>
//! ```
//!
//! `<agent>` is `robot` or `object`. Matrix informations are written as the
//! upper triangle in row-major order. Vertices and FIX records are emitted
//! sorted by `(t, agent)`; edges in insertion order. The same serialization
//! always produces identical bytes, so graph files can be diffed.

mod solver;

pub use solver::{OptimizeReport, SolverOptions};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SMatrix, SVector};
use thiserror::Error;

use crate::geometry::{angle_diff, Point2, Pose2};

/// Which trajectory a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Agent {
    Robot,
    Object,
}

impl Agent {
    pub fn label(&self) -> &'static str {
        match self {
            Agent::Robot => "robot",
            Agent::Object => "object",
        }
    }
}

/// Identifies one pose node: an agent at a tick.
///
/// Ordered by `(t, agent)` so that chain-structured graphs index into a
/// narrow band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub agent: Agent,
    pub t: usize,
}

impl NodeId {
    pub fn robot(t: usize) -> Self {
        NodeId {
            agent: Agent::Robot,
            t,
        }
    }

    pub fn object(t: usize) -> Self {
        NodeId {
            agent: Agent::Object,
            t,
        }
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.t, self.agent).cmp(&(other.t, other.agent))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A measurement constraint between graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Edge {
    /// Relative robot motion between two ticks, in the earlier body frame.
    RobotOdom {
        from_t: usize,
        to_t: usize,
        delta: Pose2,
        information: Matrix3<f64>,
    },
    /// Relative object motion between two ticks, in the earlier body frame.
    ObjectOdom {
        from_t: usize,
        to_t: usize,
        delta: Pose2,
        information: Matrix3<f64>,
    },
    /// UWB range between the robot and the object.
    UwbRange {
        robot_t: usize,
        object_t: usize,
        range: f64,
        information: f64,
    },
    /// Object position observed by the LiDAR, in the robot body frame.
    LidarPosition {
        robot_t: usize,
        object_t: usize,
        measurement: Point2,
        information: Matrix2<f64>,
    },
    /// Object moving direction estimated from successive LiDAR detections.
    LidarDirection {
        object_t: usize,
        direction: f64,
        information: f64,
    },
}

impl Edge {
    pub fn kind(&self) -> &'static str {
        match self {
            Edge::RobotOdom { .. } => "robot_odom",
            Edge::ObjectOdom { .. } => "object_odom",
            Edge::UwbRange { .. } => "uwb_range",
            Edge::LidarPosition { .. } => "lidar_position",
            Edge::LidarDirection { .. } => "lidar_direction",
        }
    }

    /// Residual dimension of this edge.
    pub fn dim(&self) -> usize {
        match self {
            Edge::RobotOdom { .. } | Edge::ObjectOdom { .. } => 3,
            Edge::LidarPosition { .. } => 2,
            Edge::UwbRange { .. } | Edge::LidarDirection { .. } => 1,
        }
    }

    /// Nodes this edge constrains (second is `None` for unary edges).
    pub fn endpoints(&self) -> (NodeId, Option<NodeId>) {
        match *self {
            Edge::RobotOdom { from_t, to_t, .. } => {
                (NodeId::robot(from_t), Some(NodeId::robot(to_t)))
            }
            Edge::ObjectOdom { from_t, to_t, .. } => {
                (NodeId::object(from_t), Some(NodeId::object(to_t)))
            }
            Edge::UwbRange {
                robot_t, object_t, ..
            }
            | Edge::LidarPosition {
                robot_t, object_t, ..
            } => (NodeId::robot(robot_t), Some(NodeId::object(object_t))),
            Edge::LidarDirection { object_t, .. } => (NodeId::object(object_t), None),
        }
    }

    fn validate_information(&self) -> Result<(), GraphError> {
        fn sym_psd3(m: &Matrix3<f64>) -> bool {
            let scale = m.amax().max(1.0);
            let symmetric = (0..3).all(|i| {
                (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-9 * scale)
            });
            symmetric && m.symmetric_eigenvalues().iter().all(|&v| v >= -1e-12 * scale)
        }
        fn sym_psd2(m: &Matrix2<f64>) -> bool {
            let scale = m.amax().max(1.0);
            (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-9 * scale
                && m.symmetric_eigenvalues().iter().all(|&v| v >= -1e-12 * scale)
        }
        let ok = match self {
            Edge::RobotOdom { information, .. } | Edge::ObjectOdom { information, .. } => {
                information.iter().all(|v| v.is_finite()) && sym_psd3(information)
            }
            Edge::LidarPosition { information, .. } => {
                information.iter().all(|v| v.is_finite()) && sym_psd2(information)
            }
            Edge::UwbRange { information, .. } | Edge::LidarDirection { information, .. } => {
                information.is_finite() && *information >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GraphError::InvalidInformation { kind: self.kind() })
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge references missing node {0:?}")]
    UnknownNode(NodeId),
    #[error("node {0:?} already exists")]
    DuplicateNode(NodeId),
    #[error("{kind} information must be symmetric positive semidefinite")]
    InvalidInformation { kind: &'static str },
    #[error("graph has no fixed node; fix at least one anchor before optimizing")]
    NoFixedNode,
    #[error("degenerate graph: normal equations rank-deficient after gauge fixing")]
    DegenerateGraph,
    #[error("graph parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense normal equations `J^T Ω J` and `J^T Ω e` over the free variables.
pub struct LinearizedSystem {
    /// Free nodes in variable order; node `i` owns columns `3i..3i+3`.
    pub index: Vec<NodeId>,
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

/// Factor graph over robot/object poses.
#[derive(Debug, Clone, Default)]
pub struct PoseGraph {
    nodes: BTreeMap<NodeId, Pose2>,
    edges: Vec<Edge>,
    fixed: BTreeSet<NodeId>,
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, pose: Pose2) -> Result<(), GraphError> {
        if self.nodes.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.nodes.insert(id, pose);
        Ok(())
    }

    pub fn set_pose(&mut self, id: NodeId, pose: Pose2) -> Result<(), GraphError> {
        match self.nodes.get_mut(&id) {
            Some(p) => {
                *p = pose;
                Ok(())
            }
            None => Err(GraphError::UnknownNode(id)),
        }
    }

    pub fn pose(&self, id: NodeId) -> Option<Pose2> {
        self.nodes.get(&id).copied()
    }

    pub fn fix(&mut self, id: NodeId) -> Result<(), GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        self.fixed.insert(id);
        Ok(())
    }

    pub fn is_fixed(&self, id: NodeId) -> bool {
        self.fixed.contains(&id)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        edge.validate_information()?;
        let (a, b) = edge.endpoints();
        if !self.nodes.contains_key(&a) {
            return Err(GraphError::UnknownNode(a));
        }
        if let Some(b) = b {
            if !self.nodes.contains_key(&b) {
                return Err(GraphError::UnknownNode(b));
            }
        }
        self.edges.push(edge);
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Pose2)> + '_ {
        self.nodes.iter().map(|(id, p)| (*id, *p))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_tick(&self) -> Option<usize> {
        self.nodes.keys().map(|id| id.t).max()
    }

    /// Residual vector of one edge at the current estimates.
    pub fn residual(&self, edge: &Edge) -> DVector<f64> {
        match edge {
            Edge::RobotOdom { .. } | Edge::ObjectOdom { .. } => {
                let (r, _, _) = self.odom_residual_jacobian(edge);
                DVector::from_column_slice(r.as_slice())
            }
            Edge::UwbRange { .. } => {
                let (r, _, _) = self.range_residual_jacobian(edge);
                DVector::from_element(1, r)
            }
            Edge::LidarPosition { .. } => {
                let (r, _, _) = self.lidar_position_residual_jacobian(edge);
                DVector::from_column_slice(r.as_slice())
            }
            Edge::LidarDirection {
                object_t,
                direction,
                ..
            } => {
                let pose = self.nodes[&NodeId::object(*object_t)];
                DVector::from_element(1, angle_diff(pose.theta, *direction))
            }
        }
    }

    /// Residual and analytic Jacobian blocks of one edge, one `(node, J)`
    /// pair per endpoint, each Jacobian w.r.t. that node's `(x, y, theta)`.
    pub fn linearize_edge(&self, edge: &Edge) -> (DVector<f64>, Vec<(NodeId, DMatrix<f64>)>) {
        fn dynamize<const R: usize>(m: &SMatrix<f64, R, 3>) -> DMatrix<f64> {
            DMatrix::from_fn(R, 3, |i, j| m[(i, j)])
        }
        let (a, b) = edge.endpoints();
        match edge {
            Edge::RobotOdom { .. } | Edge::ObjectOdom { .. } => {
                let (r, ja, jb) = self.odom_residual_jacobian(edge);
                (
                    DVector::from_column_slice(r.as_slice()),
                    vec![(a, dynamize(&ja)), (b.unwrap(), dynamize(&jb))],
                )
            }
            Edge::UwbRange { .. } => {
                let (r, ja, jb) = self.range_residual_jacobian(edge);
                (
                    DVector::from_element(1, r),
                    vec![(a, dynamize(&ja)), (b.unwrap(), dynamize(&jb))],
                )
            }
            Edge::LidarPosition { .. } => {
                let (r, ja, jb) = self.lidar_position_residual_jacobian(edge);
                (
                    DVector::from_column_slice(r.as_slice()),
                    vec![(a, dynamize(&ja)), (b.unwrap(), dynamize(&jb))],
                )
            }
            Edge::LidarDirection { .. } => {
                let j = SMatrix::<f64, 1, 3>::new(0.0, 0.0, 1.0);
                (self.residual(edge), vec![(a, dynamize(&j))])
            }
        }
    }

    /// Total weighted objective `Σ e^T Ω e` at the current estimates.
    pub fn objective(&self) -> f64 {
        self.objective_with_kernel(None)
    }

    pub(crate) fn objective_with_kernel(&self, huber_delta: Option<f64>) -> f64 {
        self.edges
            .iter()
            .map(|edge| {
                let s = self.edge_weighted_square(edge);
                match huber_delta {
                    Some(d) => huber_rho(s, d),
                    None => s,
                }
            })
            .sum()
    }

    fn edge_weighted_square(&self, edge: &Edge) -> f64 {
        match edge {
            Edge::RobotOdom { information, .. } | Edge::ObjectOdom { information, .. } => {
                let (r, _, _) = self.odom_residual_jacobian(edge);
                (r.transpose() * information * r)[(0, 0)]
            }
            Edge::UwbRange { information, .. } => {
                let (r, _, _) = self.range_residual_jacobian(edge);
                information * r * r
            }
            Edge::LidarPosition { information, .. } => {
                let (r, _, _) = self.lidar_position_residual_jacobian(edge);
                (r.transpose() * information * r)[(0, 0)]
            }
            Edge::LidarDirection {
                object_t,
                direction,
                information,
            } => {
                let pose = self.nodes[&NodeId::object(*object_t)];
                let r = angle_diff(pose.theta, *direction);
                information * r * r
            }
        }
    }

    // Residual + analytic Jacobians w.r.t. (from, to) parameters (x, y, theta).
    fn odom_residual_jacobian(&self, edge: &Edge) -> (SVector<f64, 3>, Matrix3<f64>, Matrix3<f64>) {
        let (from, to, delta) = match *edge {
            Edge::RobotOdom {
                from_t, to_t, delta, ..
            } => (NodeId::robot(from_t), NodeId::robot(to_t), delta),
            Edge::ObjectOdom {
                from_t, to_t, delta, ..
            } => (NodeId::object(from_t), NodeId::object(to_t), delta),
            _ => unreachable!("odom_residual_jacobian on non-odom edge"),
        };
        let a = self.nodes[&from];
        let b = self.nodes[&to];
        let (s, c) = a.theta.sin_cos();
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let px = c * dx + s * dy;
        let py = -s * dx + c * dy;
        let r = SVector::<f64, 3>::new(
            px - delta.x,
            py - delta.y,
            angle_diff(b.theta - a.theta, delta.theta),
        );
        #[rustfmt::skip]
        let ja = Matrix3::new(
            -c, -s,  py,
             s, -c, -px,
            0.0, 0.0, -1.0,
        );
        #[rustfmt::skip]
        let jb = Matrix3::new(
             c,  s, 0.0,
            -s,  c, 0.0,
            0.0, 0.0, 1.0,
        );
        (r, ja, jb)
    }

    fn range_residual_jacobian(
        &self,
        edge: &Edge,
    ) -> (f64, SMatrix<f64, 1, 3>, SMatrix<f64, 1, 3>) {
        let Edge::UwbRange {
            robot_t,
            object_t,
            range,
            ..
        } = *edge
        else {
            unreachable!("range_residual_jacobian on non-range edge")
        };
        let a = self.nodes[&NodeId::robot(robot_t)];
        let b = self.nodes[&NodeId::object(object_t)];
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        // Guard the removable singularity at coincident positions.
        let n = dx.hypot(dy).max(1e-9);
        let r = dx.hypot(dy) - range;
        let ja = SMatrix::<f64, 1, 3>::new(-dx / n, -dy / n, 0.0);
        let jb = SMatrix::<f64, 1, 3>::new(dx / n, dy / n, 0.0);
        (r, ja, jb)
    }

    fn lidar_position_residual_jacobian(
        &self,
        edge: &Edge,
    ) -> (SVector<f64, 2>, SMatrix<f64, 2, 3>, SMatrix<f64, 2, 3>) {
        let Edge::LidarPosition {
            robot_t,
            object_t,
            measurement,
            ..
        } = *edge
        else {
            unreachable!("lidar_position_residual_jacobian on non-position edge")
        };
        let a = self.nodes[&NodeId::robot(robot_t)];
        let b = self.nodes[&NodeId::object(object_t)];
        let (s, c) = a.theta.sin_cos();
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let r = SVector::<f64, 2>::new(u - measurement.x, v - measurement.y);
        #[rustfmt::skip]
        let ja = SMatrix::<f64, 2, 3>::new(
            -c, -s,  v,
             s, -c, -u,
        );
        #[rustfmt::skip]
        let jb = SMatrix::<f64, 2, 3>::new(
             c,  s, 0.0,
            -s,  c, 0.0,
        );
        (r, ja, jb)
    }

    /// Variable ordering over free nodes, `(t, agent)`-sorted. `extra_fixed`
    /// lets the sliding-window solver freeze additional nodes for one solve.
    fn free_index(&self, extra_fixed: Option<&BTreeSet<NodeId>>) -> Vec<NodeId> {
        self.nodes
            .keys()
            .filter(|id| {
                !self.fixed.contains(id) && extra_fixed.map_or(true, |f| !f.contains(id))
            })
            .copied()
            .collect()
    }

    /// Accumulates `J^T Ω J` and `J^T Ω e` into `sink` for every edge,
    /// restricted to the free variables in `offsets`.
    fn assemble<S: NormalSink>(
        &self,
        offsets: &BTreeMap<NodeId, usize>,
        huber_delta: Option<f64>,
        sink: &mut S,
    ) {
        for edge in &self.edges {
            let w = match huber_delta {
                Some(d) => huber_weight(self.edge_weighted_square(edge), d),
                None => 1.0,
            };
            match edge {
                Edge::RobotOdom { information, .. } | Edge::ObjectOdom { information, .. } => {
                    let (r, ja, jb) = self.odom_residual_jacobian(edge);
                    let (na, nb) = edge.endpoints();
                    let blocks = [
                        (offsets.get(&na).copied(), ja),
                        (offsets.get(&nb.unwrap()).copied(), jb),
                    ];
                    accumulate(&(information * w), &r, &blocks, sink);
                }
                Edge::UwbRange { information, .. } => {
                    let (r, ja, jb) = self.range_residual_jacobian(edge);
                    let (na, nb) = edge.endpoints();
                    let blocks = [
                        (offsets.get(&na).copied(), ja),
                        (offsets.get(&nb.unwrap()).copied(), jb),
                    ];
                    accumulate(
                        &SMatrix::<f64, 1, 1>::new(information * w),
                        &SVector::<f64, 1>::new(r),
                        &blocks,
                        sink,
                    );
                }
                Edge::LidarPosition { information, .. } => {
                    let (r, ja, jb) = self.lidar_position_residual_jacobian(edge);
                    let (na, nb) = edge.endpoints();
                    let blocks = [
                        (offsets.get(&na).copied(), ja),
                        (offsets.get(&nb.unwrap()).copied(), jb),
                    ];
                    accumulate(&(information * w), &r, &blocks, sink);
                }
                Edge::LidarDirection {
                    object_t,
                    direction,
                    information,
                } => {
                    let pose = self.nodes[&NodeId::object(*object_t)];
                    let r = SVector::<f64, 1>::new(angle_diff(pose.theta, *direction));
                    let j = SMatrix::<f64, 1, 3>::new(0.0, 0.0, 1.0);
                    let blocks = [(offsets.get(&NodeId::object(*object_t)).copied(), j)];
                    accumulate(
                        &SMatrix::<f64, 1, 1>::new(information * w),
                        &r,
                        &blocks,
                        sink,
                    );
                }
            }
        }
    }

    /// Builds the dense normal equations over the free variables without any
    /// rank check. Useful for inspecting observability (e.g. nullspace
    /// dimension of an under-constrained graph).
    pub fn normal_equations(&self) -> Result<LinearizedSystem, GraphError> {
        if self.fixed.is_empty() {
            return Err(GraphError::NoFixedNode);
        }
        let index = self.free_index(None);
        let offsets: BTreeMap<NodeId, usize> =
            index.iter().enumerate().map(|(i, id)| (*id, 3 * i)).collect();
        let n = 3 * index.len();
        let mut sink = DenseSink {
            h: DMatrix::zeros(n, n),
            g: DVector::zeros(n),
        };
        self.assemble(&offsets, None, &mut sink);
        Ok(LinearizedSystem {
            index,
            hessian: sink.h,
            gradient: sink.g,
        })
    }

    /// Gauss-Newton linearization: normal equations plus a positive
    /// definiteness check of the gauge-fixed Hessian approximation.
    pub fn linearize(&self) -> Result<LinearizedSystem, GraphError> {
        let sys = self.normal_equations()?;
        if sys.hessian.nrows() > 0 && sys.hessian.clone().cholesky().is_none() {
            return Err(GraphError::DegenerateGraph);
        }
        Ok(sys)
    }
}

fn huber_rho(s: f64, delta: f64) -> f64 {
    // s is the squared weighted residual; rho in the same units.
    if s <= delta * delta {
        s
    } else {
        2.0 * delta * s.sqrt() - delta * delta
    }
}

fn huber_weight(s: f64, delta: f64) -> f64 {
    if s <= delta * delta {
        1.0
    } else {
        delta / s.sqrt()
    }
}

/// Destination for assembled normal-equation entries. Sinks may ignore the
/// upper triangle; assembly emits every (i, j) pair of the symmetric system.
pub(crate) trait NormalSink {
    fn add_h(&mut self, i: usize, j: usize, v: f64);
    fn add_g(&mut self, i: usize, v: f64);
}

struct DenseSink {
    h: DMatrix<f64>,
    g: DVector<f64>,
}

impl NormalSink for DenseSink {
    fn add_h(&mut self, i: usize, j: usize, v: f64) {
        self.h[(i, j)] += v;
    }
    fn add_g(&mut self, i: usize, v: f64) {
        self.g[i] += v;
    }
}

fn accumulate<const R: usize, const B: usize, S: NormalSink>(
    omega: &SMatrix<f64, R, R>,
    r: &SVector<f64, R>,
    blocks: &[(Option<usize>, SMatrix<f64, R, 3>); B],
    sink: &mut S,
) {
    let wr = omega * r;
    for (oa, ja) in blocks {
        let Some(oa) = oa else { continue };
        let g = ja.transpose() * wr;
        for k in 0..3 {
            sink.add_g(oa + k, g[k]);
        }
        for (ob, jb) in blocks {
            let Some(ob) = ob else { continue };
            let h = ja.transpose() * omega * jb;
            for i in 0..3 {
                for j in 0..3 {
                    sink.add_h(oa + i, ob + j, h[(i, j)]);
                }
            }
        }
    }
}

// --- text serialization ---

fn push_f64(out: &mut String, v: f64) {
    let _ = write!(out, " {v}");
}

impl PoseGraph {
    /// Serializes to the documented line format. Deterministic byte-for-byte.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, pose) in &self.nodes {
            out.push_str("VERTEX ");
            out.push_str(id.agent.label());
            let _ = write!(out, " {}", id.t);
            push_f64(&mut out, pose.x);
            push_f64(&mut out, pose.y);
            push_f64(&mut out, pose.theta);
            out.push('\n');
        }
        for id in &self.fixed {
            let _ = writeln!(out, "FIX {} {}", id.agent.label(), id.t);
        }
        for edge in &self.edges {
            out.push_str("EDGE ");
            out.push_str(edge.kind());
            match edge {
                Edge::RobotOdom {
                    from_t,
                    to_t,
                    delta,
                    information,
                }
                | Edge::ObjectOdom {
                    from_t,
                    to_t,
                    delta,
                    information,
                } => {
                    let _ = write!(out, " {from_t} {to_t}");
                    push_f64(&mut out, delta.x);
                    push_f64(&mut out, delta.y);
                    push_f64(&mut out, delta.theta);
                    for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
                        push_f64(&mut out, information[(i, j)]);
                    }
                }
                Edge::UwbRange {
                    robot_t,
                    object_t,
                    range,
                    information,
                } => {
                    let _ = write!(out, " {robot_t} {object_t}");
                    push_f64(&mut out, *range);
                    push_f64(&mut out, *information);
                }
                Edge::LidarPosition {
                    robot_t,
                    object_t,
                    measurement,
                    information,
                } => {
                    let _ = write!(out, " {robot_t} {object_t}");
                    push_f64(&mut out, measurement.x);
                    push_f64(&mut out, measurement.y);
                    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                        push_f64(&mut out, information[(i, j)]);
                    }
                }
                Edge::LidarDirection {
                    object_t,
                    direction,
                    information,
                } => {
                    let _ = write!(out, " {object_t}");
                    push_f64(&mut out, *direction);
                    push_f64(&mut out, *information);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the line format produced by [`PoseGraph::to_text`].
    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        fn err(line: usize, msg: impl Into<String>) -> GraphError {
            GraphError::Parse {
                line,
                msg: msg.into(),
            }
        }
        fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, GraphError> {
            tok.ok_or_else(|| err(line, "missing field"))?
                .parse()
                .map_err(|e| err(line, format!("bad float: {e}")))
        }
        fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize, GraphError> {
            tok.ok_or_else(|| err(line, "missing field"))?
                .parse()
                .map_err(|e| err(line, format!("bad tick: {e}")))
        }
        fn parse_agent(tok: Option<&str>, line: usize) -> Result<Agent, GraphError> {
            match tok {
                Some("robot") => Ok(Agent::Robot),
                Some("object") => Ok(Agent::Object),
                other => Err(err(line, format!("bad agent {other:?}"))),
            }
        }

        let mut graph = PoseGraph::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tok = trimmed.split_ascii_whitespace();
            match tok.next() {
                Some("VERTEX") => {
                    let agent = parse_agent(tok.next(), line)?;
                    let t = parse_usize(tok.next(), line)?;
                    let x = parse_f64(tok.next(), line)?;
                    let y = parse_f64(tok.next(), line)?;
                    let theta = parse_f64(tok.next(), line)?;
                    graph
                        .add_node(NodeId { agent, t }, Pose2::new(x, y, theta))
                        .map_err(|e| err(line, e.to_string()))?;
                }
                Some("FIX") => {
                    let agent = parse_agent(tok.next(), line)?;
                    let t = parse_usize(tok.next(), line)?;
                    graph
                        .fix(NodeId { agent, t })
                        .map_err(|e| err(line, e.to_string()))?;
                }
                Some("EDGE") => {
                    let kind = tok.next().ok_or_else(|| err(line, "missing edge kind"))?;
                    let edge = match kind {
                        "robot_odom" | "object_odom" => {
                            let from_t = parse_usize(tok.next(), line)?;
                            let to_t = parse_usize(tok.next(), line)?;
                            let delta = Pose2::new(
                                parse_f64(tok.next(), line)?,
                                parse_f64(tok.next(), line)?,
                                parse_f64(tok.next(), line)?,
                            );
                            let mut u = [0.0; 6];
                            for v in &mut u {
                                *v = parse_f64(tok.next(), line)?;
                            }
                            let information = Matrix3::new(
                                u[0], u[1], u[2], u[1], u[3], u[4], u[2], u[4], u[5],
                            );
                            if kind == "robot_odom" {
                                Edge::RobotOdom {
                                    from_t,
                                    to_t,
                                    delta,
                                    information,
                                }
                            } else {
                                Edge::ObjectOdom {
                                    from_t,
                                    to_t,
                                    delta,
                                    information,
                                }
                            }
                        }
                        "uwb_range" => Edge::UwbRange {
                            robot_t: parse_usize(tok.next(), line)?,
                            object_t: parse_usize(tok.next(), line)?,
                            range: parse_f64(tok.next(), line)?,
                            information: parse_f64(tok.next(), line)?,
                        },
                        "lidar_position" => {
                            let robot_t = parse_usize(tok.next(), line)?;
                            let object_t = parse_usize(tok.next(), line)?;
                            let measurement = Point2::new(
                                parse_f64(tok.next(), line)?,
                                parse_f64(tok.next(), line)?,
                            );
                            let mut u = [0.0; 3];
                            for v in &mut u {
                                *v = parse_f64(tok.next(), line)?;
                            }
                            Edge::LidarPosition {
                                robot_t,
                                object_t,
                                measurement,
                                information: Matrix2::new(u[0], u[1], u[1], u[2]),
                            }
                        }
                        "lidar_direction" => Edge::LidarDirection {
                            object_t: parse_usize(tok.next(), line)?,
                            direction: parse_f64(tok.next(), line)?,
                            information: parse_f64(tok.next(), line)?,
                        },
                        other => return Err(err(line, format!("unknown edge kind {other:?}"))),
                    };
                    graph.add_edge(edge).map_err(|e| err(line, e.to_string()))?;
                }
                other => return Err(err(line, format!("unknown record {other:?}"))),
            }
            if tok.next().is_some() {
                return Err(err(line, "trailing fields"));
            }
        }
        Ok(graph)
    }
}
