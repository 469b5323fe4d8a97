//! Sensor log container and its line-delimited text format.
//!
//! One record per line, fields separated by single spaces, floats in
//! shortest round-trip notation so logs are diffable and parse back exactly:
//!
//! ```text
//! CONFIG <json>                      # sensor config, one JSON object
//! TICKS <n>
//! TRUTH <agent> <t> <x> <y> <theta>
//! ODOM <agent> <t> <dx> <dy> <dtheta>
//! SCAN <t> <n_points> <x1> <y1> ... <xn> <yn>
//! UWB <t> <range> <los 0|1>
//! ```
//!
//! `<agent>` is `R` or `O`. Records are emitted grouped by tick with a fixed
//! within-tick order (TRUTH R, TRUTH O, ODOM R, ODOM O, SCAN, UWB), so equal
//! logs serialize to identical bytes.

use std::fmt::Write as _;

use super::{OdomIncrement, RangeMeasurement, SensorConfig, SimError};
use crate::geometry::{Point2, Pose2};
use crate::identify::PointCloud;

/// Time-ordered sensor streams plus ground truth for one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLog {
    pub ticks: usize,
    pub config: SensorConfig,
    /// Ground-truth pose per tick (analysis only; the pipeline never reads
    /// these except for the configured start poses at tick 0).
    pub truth_robot: Vec<Pose2>,
    pub truth_object: Vec<Pose2>,
    pub scans: Vec<PointCloud>,
    pub ranges: Vec<RangeMeasurement>,
    pub odom_robot: Vec<OdomIncrement>,
    pub odom_object: Vec<OdomIncrement>,
}

impl SensorLog {
    pub fn scan_at(&self, t: usize) -> Option<&PointCloud> {
        self.scans
            .binary_search_by_key(&t, |s| s.t)
            .ok()
            .map(|i| &self.scans[i])
    }

    pub fn range_at(&self, t: usize) -> Option<&RangeMeasurement> {
        self.ranges
            .binary_search_by_key(&t, |r| r.t)
            .ok()
            .map(|i| &self.ranges[i])
    }

    pub fn odom_robot_at(&self, t: usize) -> Option<&OdomIncrement> {
        self.odom_robot
            .binary_search_by_key(&t, |o| o.t)
            .ok()
            .map(|i| &self.odom_robot[i])
    }

    pub fn odom_object_at(&self, t: usize) -> Option<&OdomIncrement> {
        self.odom_object
            .binary_search_by_key(&t, |o| o.t)
            .ok()
            .map(|i| &self.odom_object[i])
    }

    /// Serializes to the documented record format, deterministically.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "CONFIG {}",
            serde_json::to_string(&self.config).expect("config serializes")
        );
        let _ = writeln!(out, "TICKS {}", self.ticks);
        for t in 0..self.ticks {
            for (tag, pose) in [("R", &self.truth_robot[t]), ("O", &self.truth_object[t])] {
                let _ = writeln!(out, "TRUTH {tag} {t} {} {} {}", pose.x, pose.y, pose.theta);
            }
            for (tag, inc) in [
                ("R", self.odom_robot_at(t)),
                ("O", self.odom_object_at(t)),
            ] {
                if let Some(inc) = inc {
                    let _ = writeln!(
                        out,
                        "ODOM {tag} {t} {} {} {}",
                        inc.delta.x, inc.delta.y, inc.delta.theta
                    );
                }
            }
            if let Some(scan) = self.scan_at(t) {
                let _ = write!(out, "SCAN {t} {}", scan.points.len());
                for p in &scan.points {
                    let _ = write!(out, " {} {}", p.x, p.y);
                }
                out.push('\n');
            }
            if let Some(r) = self.range_at(t) {
                let _ = writeln!(out, "UWB {t} {} {}", r.range, if r.los { 1 } else { 0 });
            }
        }
        out
    }

    /// Parses the record format produced by [`SensorLog::to_text`].
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        fn err(line: usize, msg: impl Into<String>) -> SimError {
            SimError::Parse {
                line,
                msg: msg.into(),
            }
        }
        fn f(tok: Option<&str>, line: usize) -> Result<f64, SimError> {
            tok.ok_or_else(|| err(line, "missing field"))?
                .parse()
                .map_err(|e| err(line, format!("bad float: {e}")))
        }
        fn u(tok: Option<&str>, line: usize) -> Result<usize, SimError> {
            tok.ok_or_else(|| err(line, "missing field"))?
                .parse()
                .map_err(|e| err(line, format!("bad integer: {e}")))
        }

        let mut config: Option<SensorConfig> = None;
        let mut ticks = 0usize;
        let mut truth_robot: Vec<(usize, Pose2)> = Vec::new();
        let mut truth_object: Vec<(usize, Pose2)> = Vec::new();
        let mut scans = Vec::new();
        let mut ranges = Vec::new();
        let mut odom_robot = Vec::new();
        let mut odom_object = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tok = trimmed.split_ascii_whitespace();
            match tok.next() {
                Some("CONFIG") => {
                    let rest = trimmed["CONFIG".len()..].trim();
                    config = Some(
                        serde_json::from_str(rest)
                            .map_err(|e| err(line, format!("bad configuration: {e}")))?,
                    );
                    continue;
                }
                Some("TICKS") => {
                    ticks = u(tok.next(), line)?;
                }
                Some("TRUTH") => {
                    let agent = tok.next();
                    let t = u(tok.next(), line)?;
                    let pose = Pose2::new(f(tok.next(), line)?, f(tok.next(), line)?, f(tok.next(), line)?);
                    match agent {
                        Some("R") => truth_robot.push((t, pose)),
                        Some("O") => truth_object.push((t, pose)),
                        other => return Err(err(line, format!("bad agent {other:?}"))),
                    }
                }
                Some("ODOM") => {
                    let agent = tok.next();
                    let t = u(tok.next(), line)?;
                    let delta = Pose2::new(f(tok.next(), line)?, f(tok.next(), line)?, f(tok.next(), line)?);
                    let inc = OdomIncrement { t, delta };
                    match agent {
                        Some("R") => odom_robot.push(inc),
                        Some("O") => odom_object.push(inc),
                        other => return Err(err(line, format!("bad agent {other:?}"))),
                    }
                }
                Some("SCAN") => {
                    let t = u(tok.next(), line)?;
                    let n = u(tok.next(), line)?;
                    let mut points = Vec::with_capacity(n);
                    for _ in 0..n {
                        points.push(Point2::new(f(tok.next(), line)?, f(tok.next(), line)?));
                    }
                    scans.push(PointCloud { t, points });
                }
                Some("UWB") => {
                    let t = u(tok.next(), line)?;
                    let range = f(tok.next(), line)?;
                    let los = match tok.next() {
                        Some("1") => true,
                        Some("0") => false,
                        other => return Err(err(line, format!("bad los flag {other:?}"))),
                    };
                    ranges.push(RangeMeasurement { t, range, los });
                }
                other => return Err(err(line, format!("unknown record {other:?}"))),
            }
            if tok.next().is_some() {
                return Err(err(line, "trailing fields"));
            }
        }

        let config = config.ok_or_else(|| err(0, "missing CONFIG record"))?;
        let check_truth = |v: &[(usize, Pose2)]| -> Result<Vec<Pose2>, SimError> {
            if v.len() != ticks || v.iter().enumerate().any(|(i, (t, _))| i != *t) {
                return Err(err(0, "ground truth must cover every tick in order"));
            }
            Ok(v.iter().map(|(_, p)| *p).collect())
        };
        Ok(SensorLog {
            ticks,
            config,
            truth_robot: check_truth(&truth_robot)?,
            truth_object: check_truth(&truth_object)?,
            scans,
            ranges,
            odom_robot,
            odom_object,
        })
    }
}
