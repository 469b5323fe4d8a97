//! Object identification from 2D LiDAR: adaptive clustering of a scan,
//! dynamic-cluster detection across successive scans, and UWB-range gating
//! to pick the object among the movers.
//!
//! Clustering uses a range-adaptive link distance `d* = 2 * cr * tan(Θ/2)`
//! where `Θ` is the LiDAR angular resolution and `cr` is the upper edge of
//! the range band containing the nearer point of a pair. The band edges are
//! configurable; the defaults double from 0.5 m to 16 m.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Pose2};
use crate::sim::RangeMeasurement;

/// A LiDAR scan converted to 2D points in the sensor body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub t: usize,
    pub points: Vec<Point2>,
}

/// A group of mutually range-adaptively connected points.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Arithmetic mean of the members.
    pub centroid: Point2,
    pub members: Vec<Point2>,
}

impl Cluster {
    pub fn point_count(&self) -> usize {
        self.members.len()
    }

    /// Distance of the centroid from the sensor.
    pub fn range(&self) -> f64 {
        self.centroid.norm()
    }
}

/// The object position picked from the dynamic clusters by UWB gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDetection {
    pub t: usize,
    /// Object position in the robot body frame.
    pub position: Point2,
    /// The UWB range this detection was matched against.
    pub matched_range: f64,
    /// `| ||position|| - matched_range |`; never exceeds the gate tolerance.
    pub range_gap: f64,
}

/// Clustering and dynamic-detection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyParams {
    /// LiDAR angular resolution Θ, radians.
    pub angular_resolution: f64,
    /// Upper edges of the range bands, strictly increasing, meters. The
    /// first band starts at 0; ranges beyond the last edge use the last one.
    pub band_edges: Vec<f64>,
    /// Clusters smaller than this are discarded as noise.
    pub min_cluster_size: usize,
    /// Minimum centroid displacement for a cluster to count as moving.
    pub motion_threshold: f64,
    /// Maximum centroid distance for associating clusters across scans.
    pub association_radius: f64,
    /// Maximum |cluster range - UWB range| for accepting a detection.
    pub match_tolerance: f64,
}

impl IdentifyParams {
    pub fn defaults(angular_resolution: f64) -> Self {
        IdentifyParams {
            angular_resolution,
            band_edges: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            min_cluster_size: 3,
            motion_threshold: 0.05,
            association_radius: 0.5,
            match_tolerance: 0.3,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.angular_resolution > 0.0) {
            return Err("angular resolution must be > 0".into());
        }
        if self.band_edges.is_empty() {
            return Err("band_edges must not be empty".into());
        }
        if self.band_edges[0] <= 0.0 || self.band_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err("band_edges must be strictly increasing and positive".into());
        }
        if !(self.match_tolerance > 0.0) {
            return Err("match_tolerance must be > 0".into());
        }
        Ok(())
    }
}

/// Adaptive link distance for a pair whose nearer point is at `range`:
/// `2 * cr * tan(Θ/2)` with `cr` the containing band's upper edge.
pub fn link_distance(range: f64, theta: f64, band_edges: &[f64]) -> f64 {
    let cr = band_edges
        .iter()
        .copied()
        .find(|&e| range < e)
        .unwrap_or(*band_edges.last().expect("validated non-empty"));
    2.0 * cr * (theta / 2.0).tan()
}

/// Partitions a scan into clusters by single-linkage connectivity under the
/// range-adaptive link distance, dropping clusters below `min_cluster_size`.
/// Returned clusters are sorted by centroid range (ties by centroid x, y),
/// and members are sorted by (x, y), so the output does not depend on input
/// point order.
pub fn adaptive_cluster(cloud: &PointCloud, params: &IdentifyParams) -> Vec<Cluster> {
    let pts = &cloud.points;
    if pts.is_empty() {
        return Vec::new();
    }
    let n = pts.len();

    // Flood fill over the pairwise connectivity rule, restricted to a grid
    // of cell size d*_max: no pair farther apart than the largest link
    // distance can connect, so only neighboring cells need checking. The
    // test oracle runs plain union-find over all pairs of the same rule.
    let d_max = link_distance(
        f64::INFINITY,
        params.angular_resolution,
        &params.band_edges,
    )
    .max(1e-9);
    let cell = |p: &Point2| -> (i64, i64) {
        ((p.x / d_max).floor() as i64, (p.y / d_max).floor() as i64)
    };
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }

    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    let mut queue = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = n_components;
        n_components += 1;
        component[start] = id;
        queue.push(start);
        while let Some(i) = queue.pop() {
            let (cx, cy) = cell(&pts[i]);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else {
                        continue;
                    };
                    for &j in bucket {
                        if component[j] != usize::MAX {
                            continue;
                        }
                        let near = pts[i].norm().min(pts[j].norm());
                        let d_star =
                            link_distance(near, params.angular_resolution, &params.band_edges);
                        if pts[i].distance(&pts[j]) <= d_star {
                            component[j] = id;
                            queue.push(j);
                        }
                    }
                }
            }
        }
    }

    let mut groups: Vec<Vec<Point2>> = vec![Vec::new(); n_components];
    for (i, &c) in component.iter().enumerate() {
        groups[c].push(pts[i]);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .filter(|g| g.len() >= params.min_cluster_size.max(1))
        .map(|mut members| {
            // Sort members before summing so the centroid is bit-identical
            // under any input ordering.
            members.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).expect("finite points"));
            let k = members.len() as f64;
            let (sx, sy) = members
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            Cluster {
                centroid: Point2::new(sx / k, sy / k),
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        (a.range(), a.centroid.x, a.centroid.y)
            .partial_cmp(&(b.range(), b.centroid.x, b.centroid.y))
            .expect("finite centroids")
    });
    clusters
}

/// Compares cluster sets from successive scans (already expressed in a common
/// frame) and returns the moving candidates: associated clusters whose
/// centroid moved at least `motion_threshold`, plus clusters with no previous
/// association (new appearances).
pub fn detect_dynamic(prev: &[Cluster], curr: &[Cluster], params: &IdentifyParams) -> Vec<Cluster> {
    curr.iter()
        .filter(|c| {
            let nearest = prev
                .iter()
                .map(|p| p.centroid.distance(&c.centroid))
                .fold(f64::INFINITY, f64::min);
            if nearest > params.association_radius {
                true // new appearance: candidate mover
            } else {
                nearest >= params.motion_threshold
            }
        })
        .cloned()
        .collect()
}

/// Picks the dynamic cluster whose range is closest to the UWB range,
/// accepting it only within `match_tolerance`. Ties break toward the smaller
/// cluster range, then the lower cluster index.
pub fn gate_by_uwb(
    dynamic: &[Cluster],
    range: &RangeMeasurement,
    params: &IdentifyParams,
) -> Option<ObjectDetection> {
    let mut best: Option<(f64, f64, usize)> = None; // (gap, cluster range, index)
    for (i, c) in dynamic.iter().enumerate() {
        let gap = (c.range() - range.range).abs();
        let key = (gap, c.range(), i);
        if best.map_or(true, |b| key < b) {
            best = Some(key);
        }
    }
    let (gap, _, idx) = best?;
    (gap <= params.match_tolerance).then(|| ObjectDetection {
        t: range.t,
        position: dynamic[idx].centroid,
        matched_range: range.range,
        range_gap: gap,
    })
}

/// Full Algorithm-1 composition for one scan pair: cluster both scans,
/// motion-compensate the previous clusters by the robot motion between the
/// scans (`robot_motion` = current body frame relative to the previous one,
/// identity for a static robot), flag movers, gate by the UWB range.
pub fn identify(
    prev_scan: &PointCloud,
    curr_scan: &PointCloud,
    robot_motion: &Pose2,
    range: &RangeMeasurement,
    params: &IdentifyParams,
) -> Option<ObjectDetection> {
    let prev_clusters = adaptive_cluster(prev_scan, params);
    let curr_clusters = adaptive_cluster(curr_scan, params);
    let prev_compensated = compensate_clusters(&prev_clusters, robot_motion);
    let dynamic = detect_dynamic(&prev_compensated, &curr_clusters, params);
    gate_by_uwb(&dynamic, range, params)
}

/// Re-expresses clusters observed in the previous robot frame in the current
/// one, given the robot's relative motion between the frames.
pub fn compensate_clusters(prev: &[Cluster], robot_motion: &Pose2) -> Vec<Cluster> {
    let inv = robot_motion.inverse();
    prev.iter()
        .map(|c| Cluster {
            centroid: inv.transform_point(&c.centroid),
            members: c
                .members
                .iter()
                .map(|p| inv.transform_point(p))
                .collect(),
        })
        .collect()
}
