//! Evaluation harness: relative-error metrics against ground truth,
//! parameter sweeps, and deterministic CSV / JSON-lines export.
//!
//! The headline metric is the error of the estimated robot→object relative
//! pose against the ground-truth relative pose at each estimation tick:
//! translation as the Euclidean norm of the position difference, rotation as
//! the absolute wrapped angle difference. Summaries report mean, standard
//! deviation (population), and max.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::angle_diff;
use crate::identify::ObjectDetection;
use crate::pipeline::{detect_all, fuse, ApproachSpec, PipelineError, PipelineParams};
use crate::sim::SensorLog;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("sweep needs at least one value")]
    EmptySweep,
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("report parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Relative error at one estimation tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickError {
    pub tick: usize,
    pub trans_error_m: f64,
    pub rot_error_rad: f64,
}

/// Mean / standard deviation / max of both error series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub trans_mean: f64,
    pub trans_std: f64,
    pub trans_max: f64,
    pub rot_mean: f64,
    pub rot_std: f64,
    pub rot_max: f64,
}

/// Per-tick relative errors plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub per_tick: Vec<TickError>,
    pub summary: SummaryStats,
}

impl ErrorReport {
    pub fn from_series(per_tick: Vec<TickError>) -> Self {
        let n = per_tick.len().max(1) as f64;
        let (mut ts, mut rs) = (0.0, 0.0);
        let (mut tmax, mut rmax) = (0.0f64, 0.0f64);
        for e in &per_tick {
            ts += e.trans_error_m;
            rs += e.rot_error_rad;
            tmax = tmax.max(e.trans_error_m);
            rmax = rmax.max(e.rot_error_rad);
        }
        let tmean = ts / n;
        let rmean = rs / n;
        let (mut tvar, mut rvar) = (0.0, 0.0);
        for e in &per_tick {
            tvar += (e.trans_error_m - tmean).powi(2);
            rvar += (e.rot_error_rad - rmean).powi(2);
        }
        ErrorReport {
            summary: SummaryStats {
                trans_mean: tmean,
                trans_std: (tvar / n).sqrt(),
                trans_max: tmax,
                rot_mean: rmean,
                rot_std: (rvar / n).sqrt(),
                rot_max: rmax,
            },
            per_tick,
        }
    }
}

/// Runs the pipeline under an approach and scores it against ground truth.
pub fn evaluate(
    log: &SensorLog,
    approach: ApproachSpec,
    params: &PipelineParams,
) -> Result<ErrorReport, EvalError> {
    let detections = if approach.use_lidar_position() || approach.use_lidar_direction() {
        detect_all(log, &params.identify)?
    } else {
        vec![None; crate::pipeline::node_ticks(log).len()]
    };
    evaluate_with_detections(log, &detections, approach, params)
}

/// Like [`evaluate`] but reuses a precomputed detection pass (detections do
/// not depend on the fusion toggles or gate parameters).
pub fn evaluate_with_detections(
    log: &SensorLog,
    detections: &[Option<ObjectDetection>],
    approach: ApproachSpec,
    params: &PipelineParams,
) -> Result<ErrorReport, EvalError> {
    let result = fuse(log, detections, approach, params)?;
    let mut series = Vec::with_capacity(result.node_ticks.len());
    for (i, &t) in result.node_ticks.iter().enumerate() {
        let est_rel = result.robot_estimates[i].relative_to(&result.object_estimates[i]);
        let true_rel = log.truth_robot[t].relative_to(&log.truth_object[t]);
        series.push(TickError {
            tick: t,
            trans_error_m: (est_rel.x - true_rel.x).hypot(est_rel.y - true_rel.y),
            rot_error_rad: angle_diff(est_rel.theta, true_rel.theta).abs(),
        });
    }
    Ok(ErrorReport::from_series(series))
}

/// Which gate parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Vartheta,
    Omega,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "vartheta" => Some(SweepParameter::Vartheta),
            "omega" => Some(SweepParameter::Omega),
            _ => None,
        }
    }
}

/// One evaluate run per value, everything else held fixed. The detection
/// pass is shared across the sweep.
pub fn sweep(
    log: &SensorLog,
    approach: ApproachSpec,
    params: &PipelineParams,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<(f64, ErrorReport)>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptySweep);
    }
    let detections = if approach.use_lidar_position() || approach.use_lidar_direction() {
        detect_all(log, &params.identify)?
    } else {
        vec![None; crate::pipeline::node_ticks(log).len()]
    };
    values
        .iter()
        .map(|&v| {
            let mut p = params.clone();
            match parameter {
                SweepParameter::Vartheta => p.gate.vartheta = v,
                SweepParameter::Omega => p.gate.omega = v,
            }
            let report = evaluate_with_detections(log, &detections, approach, &p)?;
            Ok((v, report))
        })
        .collect()
}

/// Export encodings. Both are deterministic: same data, same bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl ExportFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(ExportFormat::Csv),
            "jsonl" | "json-lines" => Some(ExportFormat::JsonLines),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryRow<'a> {
    summary: &'a str,
    trans_error_m: f64,
    rot_error_rad: f64,
}

/// Renders a report: the per-tick series followed by mean/std/max summary
/// rows. Field order is fixed; floats use shortest round-trip notation.
pub fn report_to_string(report: &ErrorReport, format: ExportFormat) -> String {
    let mut out = String::new();
    match format {
        ExportFormat::Csv => {
            out.push_str("tick,trans_error_m,rot_error_rad\n");
            for e in &report.per_tick {
                let _ = writeln!(out, "{},{},{}", e.tick, e.trans_error_m, e.rot_error_rad);
            }
            let s = &report.summary;
            let _ = writeln!(out, "mean,{},{}", s.trans_mean, s.rot_mean);
            let _ = writeln!(out, "std,{},{}", s.trans_std, s.rot_std);
            let _ = writeln!(out, "max,{},{}", s.trans_max, s.rot_max);
        }
        ExportFormat::JsonLines => {
            for e in &report.per_tick {
                let _ = writeln!(out, "{}", serde_json::to_string(e).expect("serializable"));
            }
            let s = &report.summary;
            for (name, t, r) in [
                ("mean", s.trans_mean, s.rot_mean),
                ("std", s.trans_std, s.rot_std),
                ("max", s.trans_max, s.rot_max),
            ] {
                let row = SummaryRow {
                    summary: name,
                    trans_error_m: t,
                    rot_error_rad: r,
                };
                let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serializable"));
            }
        }
    }
    out
}

/// Parses a report back from either format; round-trips exactly.
pub fn parse_report(text: &str, format: ExportFormat) -> Result<ErrorReport, EvalError> {
    let err = |line: usize, msg: String| EvalError::Parse { line, msg };
    let mut per_tick = Vec::new();
    let mut summary = [None::<(f64, f64)>; 3]; // mean, std, max

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        match format {
            ExportFormat::Csv => {
                if line == 1 {
                    if trimmed != "tick,trans_error_m,rot_error_rad" {
                        return Err(err(line, "bad header".into()));
                    }
                    continue;
                }
                let mut fields = trimmed.split(',');
                let first = fields.next().unwrap_or_default();
                let t: f64 = fields
                    .next()
                    .ok_or_else(|| err(line, "missing field".into()))?
                    .parse()
                    .map_err(|e| err(line, format!("bad float: {e}")))?;
                let r: f64 = fields
                    .next()
                    .ok_or_else(|| err(line, "missing field".into()))?
                    .parse()
                    .map_err(|e| err(line, format!("bad float: {e}")))?;
                match first {
                    "mean" => summary[0] = Some((t, r)),
                    "std" => summary[1] = Some((t, r)),
                    "max" => summary[2] = Some((t, r)),
                    tick => per_tick.push(TickError {
                        tick: tick
                            .parse()
                            .map_err(|e| err(line, format!("bad tick: {e}")))?,
                        trans_error_m: t,
                        rot_error_rad: r,
                    }),
                }
            }
            ExportFormat::JsonLines => {
                if trimmed.contains("\"summary\"") {
                    let row: SummaryRow = serde_json::from_str(trimmed)
                        .map_err(|e| err(line, e.to_string()))?;
                    let slot = match row.summary {
                        "mean" => 0,
                        "std" => 1,
                        "max" => 2,
                        other => return Err(err(line, format!("bad summary row {other:?}"))),
                    };
                    summary[slot] = Some((row.trans_error_m, row.rot_error_rad));
                } else {
                    per_tick.push(
                        serde_json::from_str(trimmed).map_err(|e| err(line, e.to_string()))?,
                    );
                }
            }
        }
    }

    let get = |i: usize, name: &str| {
        summary[i].ok_or_else(|| EvalError::Parse {
            line: 0,
            msg: format!("missing {name} summary row"),
        })
    };
    let (tm, rm) = get(0, "mean")?;
    let (ts, rs) = get(1, "std")?;
    let (tx, rx) = get(2, "max")?;
    Ok(ErrorReport {
        per_tick,
        summary: SummaryStats {
            trans_mean: tm,
            trans_std: ts,
            trans_max: tx,
            rot_mean: rm,
            rot_std: rs,
            rot_max: rx,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    value: f64,
    trans_mean: f64,
    trans_std: f64,
    trans_max: f64,
    rot_mean: f64,
    rot_std: f64,
    rot_max: f64,
}

const TABLE_HEADER: &str = "value,trans_mean,trans_std,trans_max,rot_mean,rot_std,rot_max";

/// Renders a sweep table, one summary row per swept value. An empty table is
/// a header-only file (CSV) or an empty file (JSON lines has no header).
pub fn table_to_string(rows: &[(f64, ErrorReport)], format: ExportFormat) -> String {
    let mut out = String::new();
    if format == ExportFormat::Csv {
        out.push_str(TABLE_HEADER);
        out.push('\n');
    }
    for (value, report) in rows {
        let s = &report.summary;
        match format {
            ExportFormat::Csv => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    value, s.trans_mean, s.trans_std, s.trans_max, s.rot_mean, s.rot_std, s.rot_max
                );
            }
            ExportFormat::JsonLines => {
                let row = TableRow {
                    value: *value,
                    trans_mean: s.trans_mean,
                    trans_std: s.trans_std,
                    trans_max: s.trans_max,
                    rot_mean: s.rot_mean,
                    rot_std: s.rot_std,
                    rot_max: s.rot_max,
                };
                let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serializable"));
            }
        }
    }
    out
}

/// Parses a sweep table back to `(value, summary)` rows.
pub fn parse_table(
    text: &str,
    format: ExportFormat,
) -> Result<Vec<(f64, SummaryStats)>, EvalError> {
    let err = |line: usize, msg: String| EvalError::Parse { line, msg };
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: TableRow = match format {
            ExportFormat::Csv => {
                if line == 1 {
                    if trimmed != TABLE_HEADER {
                        return Err(err(line, "bad header".into()));
                    }
                    continue;
                }
                let vals: Vec<f64> = trimmed
                    .split(',')
                    .map(|s| s.parse().map_err(|e| err(line, format!("bad float: {e}"))))
                    .collect::<Result<_, _>>()?;
                if vals.len() != 7 {
                    return Err(err(line, format!("expected 7 fields, got {}", vals.len())));
                }
                TableRow {
                    value: vals[0],
                    trans_mean: vals[1],
                    trans_std: vals[2],
                    trans_max: vals[3],
                    rot_mean: vals[4],
                    rot_std: vals[5],
                    rot_max: vals[6],
                }
            }
            ExportFormat::JsonLines => {
                serde_json::from_str(trimmed).map_err(|e| err(line, e.to_string()))?
            }
        };
        rows.push((
            row.value,
            SummaryStats {
                trans_mean: row.trans_mean,
                trans_std: row.trans_std,
                trans_max: row.trans_max,
                rot_mean: row.rot_mean,
                rot_std: row.rot_std,
                rot_max: row.rot_max,
            },
        ));
    }
    Ok(rows)
}

/// Writes rendered content to a file, mapping failures to an I/O error that
/// names the destination.
pub fn write_export(path: &Path, content: &str) -> Result<(), EvalError> {
    std::fs::write(path, content).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}
