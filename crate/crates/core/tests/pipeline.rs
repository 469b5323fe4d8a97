//! End-to-end pipeline behavior: approach faithfulness, incremental vs
//! batch optimization, sliding windows, identification on simulated scenes,
//! and export round trips.

use objloc_core::config::Scenario;
use objloc_core::direction::GateParams;
use objloc_core::eval::{
    evaluate, evaluate_with_detections, parse_report, parse_table, report_to_string, sweep,
    table_to_string, ErrorReport, ExportFormat, SweepParameter, TickError,
};
use objloc_core::geometry::{angle_diff, Point2, Pose2};
use objloc_core::graph::{NodeId, SolverOptions};
use objloc_core::identify::IdentifyParams;
use objloc_core::pipeline::{
    detect_all, fuse, node_ticks, run_pipeline, ApproachSpec, PipelineError, PipelineParams,
};
use objloc_core::sim::{dead_reckon, run_scenario, SensorConfig, SensorLog, WorldMap};

fn quiet_cfg(seed: u64) -> SensorConfig {
    SensorConfig {
        lidar_angular_resolution: 0.004363323129985824,
        lidar_max_range: 12.0,
        lidar_range_noise_sigma: 0.005,
        lidar_rate_divisor: 1,
        uwb_noise_sigma: 0.05,
        uwb_nlos_bias: 0.3,
        uwb_rate_divisor: 1,
        odom_trans_noise_sigma: 0.01,
        odom_rot_noise_sigma: 0.02,
        odom_rate_divisor: 1,
        rng_seed: seed,
    }
}

/// Clean arena: bounded walls, no occluders, object circling the robot.
fn clean_log(ticks: usize, seed: u64) -> SensorLog {
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| {
            let a = 0.02 * t as f64;
            Pose2::new(
                8.0 + 3.5 * a.cos(),
                6.0 + 3.5 * a.sin(),
                a + std::f64::consts::FRAC_PI_2,
            )
        })
        .collect();
    run_scenario(&world, &robot, &object, 0.15, &quiet_cfg(seed)).unwrap()
}

fn clean_params() -> PipelineParams {
    // band edges chosen so the test orbits sit mid-band, clear of the
    // cluster-splitting regime right below an edge
    PipelineParams {
        identify: IdentifyParams {
            band_edges: vec![0.5, 1.0, 2.0, 3.2, 6.4, 12.8],
            motion_threshold: 0.025,
            ..IdentifyParams::defaults(0.004363323129985824)
        },
        gate: GateParams::default(),
        ..Default::default()
    }
}

#[test]
fn pure_odom_matches_dead_reckoning() {
    let log = clean_log(120, 5);
    let result = run_pipeline(&log, ApproachSpec::PureOdom, &clean_params()).unwrap();
    let robot = dead_reckon(log.truth_robot[0], &log.odom_robot);
    let object = dead_reckon(log.truth_object[0], &log.odom_object);
    for ((t, want), got) in robot.iter().zip(&result.robot_estimates) {
        assert_eq!(result.node_ticks.contains(t), true);
        assert!(
            (want.x - got.x).abs() < 1e-9
                && (want.y - got.y).abs() < 1e-9
                && angle_diff(want.theta, got.theta).abs() < 1e-9,
            "robot dead-reckoning mismatch at tick {t}"
        );
    }
    for ((_, want), got) in object.iter().zip(&result.object_estimates) {
        assert!((want.x - got.x).abs() < 1e-9 && (want.y - got.y).abs() < 1e-9);
    }
}

#[test]
fn incremental_matches_batch_objective() {
    let log = clean_log(150, 9);
    let params = clean_params();
    let detections = detect_all(&log, &params.identify).unwrap();
    let result = fuse(&log, &detections, ApproachSpec::Full, &params).unwrap();
    let incremental_objective = result.graph.objective();

    // re-initialize the same graph from dead reckoning and optimize in one
    // batch; both should settle at the same optimum
    let mut batch = result.graph.clone();
    for (t, p) in dead_reckon(log.truth_robot[0], &log.odom_robot) {
        batch.set_pose(NodeId::robot(t), p).unwrap();
    }
    for (t, p) in dead_reckon(log.truth_object[0], &log.odom_object) {
        batch.set_pose(NodeId::object(t), p).unwrap();
    }
    let report = batch
        .optimize(&SolverOptions {
            max_iters: 200,
            ..Default::default()
        })
        .unwrap();
    let rel = (incremental_objective - report.final_objective).abs()
        / report.final_objective.max(1e-12);
    assert!(
        rel < 1e-9,
        "incremental {incremental_objective} vs batch {} (rel {rel})",
        report.final_objective
    );
}

#[test]
fn sliding_window_stays_near_unbounded() {
    // straight back-and-forth pass with dense detections: fixed-lag and
    // full smoothing should agree closely on the final pose
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let ticks = 500;
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| Pose2::new(4.5 + 7.0 * t as f64 / (ticks - 1) as f64, 9.5, 0.0))
        .collect();
    let mut cfg = quiet_cfg(11);
    cfg.odom_rot_noise_sigma = 0.002;
    cfg.odom_trans_noise_sigma = 0.003;
    cfg.uwb_noise_sigma = 0.03;
    cfg.odom_rate_divisor = 4;
    cfg.lidar_rate_divisor = 2;
    let log = run_scenario(&world, &robot, &object, 0.1, &cfg).unwrap();
    let params = clean_params();
    let detections = detect_all(&log, &params.identify).unwrap();
    let unbounded = fuse(&log, &detections, ApproachSpec::Full, &params).unwrap();
    let windowed = fuse(
        &log,
        &detections,
        ApproachSpec::Full,
        &PipelineParams {
            window: Some(50),
            ..params
        },
    )
    .unwrap();
    let last_u = unbounded.object_estimates.last().unwrap();
    let last_w = windowed.object_estimates.last().unwrap();
    let diff = (last_u.x - last_w.x).hypot(last_u.y - last_w.y);
    assert!(diff < 0.02, "final-pose difference {diff}");
}

#[test]
fn mean_equals_series_mean() {
    let log = clean_log(200, 13);
    let report = evaluate(&log, ApproachSpec::Full, &clean_params()).unwrap();
    let n = report.per_tick.len() as f64;
    let tm: f64 = report.per_tick.iter().map(|e| e.trans_error_m).sum::<f64>() / n;
    let rm: f64 = report.per_tick.iter().map(|e| e.rot_error_rad).sum::<f64>() / n;
    assert!((report.summary.trans_mean - tm).abs() < 1e-12);
    assert!((report.summary.rot_mean - rm).abs() < 1e-12);
    assert!(report.summary.trans_mean <= report.summary.trans_max);
    assert!(report.summary.rot_mean <= report.summary.rot_max);
}

#[test]
fn series_covers_every_estimation_tick() {
    let log = clean_log(140, 15);
    let report = evaluate(&log, ApproachSpec::OdomUwb, &clean_params()).unwrap();
    let ticks = node_ticks(&log);
    assert_eq!(report.per_tick.len(), ticks.len());
    for (e, t) in report.per_tick.iter().zip(ticks) {
        assert_eq!(e.tick, t);
    }
}

#[test]
fn single_value_sweep_equals_direct_evaluate() {
    let log = clean_log(120, 17);
    let params = clean_params();
    let direct = evaluate(&log, ApproachSpec::Full, &params).unwrap();
    let swept = sweep(
        &log,
        ApproachSpec::Full,
        &params,
        SweepParameter::Vartheta,
        &[params.gate.vartheta],
    )
    .unwrap();
    assert_eq!(swept.len(), 1);
    assert_eq!(swept[0].0, params.gate.vartheta);
    assert_eq!(swept[0].1.summary, direct.summary);
    assert_eq!(swept[0].1.per_tick, direct.per_tick);

    assert!(matches!(
        sweep(&log, ApproachSpec::Full, &params, SweepParameter::Omega, &[]),
        Err(objloc_core::eval::EvalError::EmptySweep)
    ));
}

#[test]
fn report_exports_round_trip() {
    let log = clean_log(100, 19);
    let report = evaluate(&log, ApproachSpec::Full, &clean_params()).unwrap();
    for format in [ExportFormat::Csv, ExportFormat::JsonLines] {
        let text = report_to_string(&report, format);
        let parsed = parse_report(&text, format).unwrap();
        assert_eq!(parsed.per_tick, report.per_tick);
        assert_eq!(parsed.summary, report.summary);
        assert_eq!(report_to_string(&parsed, format), text);
    }
}

#[test]
fn table_exports_round_trip() {
    let log = clean_log(100, 21);
    let params = clean_params();
    let rows = sweep(
        &log,
        ApproachSpec::Full,
        &params,
        SweepParameter::Omega,
        &[1.0, 100.0, 10_000.0],
    )
    .unwrap();
    for format in [ExportFormat::Csv, ExportFormat::JsonLines] {
        let text = table_to_string(&rows, format);
        let parsed = parse_table(&text, format).unwrap();
        assert_eq!(parsed.len(), rows.len());
        for ((v, report), (pv, summary)) in rows.iter().zip(parsed) {
            assert_eq!(*v, pv);
            assert_eq!(report.summary, summary);
        }
    }
    // empty table: header-only CSV, empty JSONL
    assert_eq!(
        table_to_string(&[], ExportFormat::Csv),
        "value,trans_mean,trans_std,trans_max,rot_mean,rot_std,rot_max\n"
    );
    assert_eq!(table_to_string(&[], ExportFormat::JsonLines), "");
    assert!(parse_table(
        &table_to_string(&[], ExportFormat::Csv),
        ExportFormat::Csv
    )
    .unwrap()
    .is_empty());
}

#[test]
fn exports_are_deterministic() {
    let scenario = Scenario::from_toml(objloc_core::config::STATIC_ROBOT_TOML).unwrap();
    let run = || {
        let log = scenario.simulate().unwrap();
        let report = evaluate(&log, ApproachSpec::Full, &scenario.pipeline).unwrap();
        report_to_string(&report, ExportFormat::Csv)
    };
    assert_eq!(run(), run());
}

#[test]
fn incompatible_rates_are_rejected() {
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); 20];
    let object = vec![Pose2::new(10.0, 6.0, 0.0); 20];
    let mut cfg = quiet_cfg(3);
    cfg.odom_rate_divisor = 4;
    cfg.lidar_rate_divisor = 3; // does not divide 4
    let log = run_scenario(&world, &robot, &object, 0.15, &cfg).unwrap();
    assert!(matches!(
        detect_all(&log, &clean_params().identify),
        Err(PipelineError::IncompatibleRates { .. })
    ));
}

#[test]
fn static_world_yields_no_detection() {
    // nothing moves: successive scans agree, so nothing is flagged dynamic
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    world
        .walls
        .push(objloc_core::sim::Segment::new(10.0, 4.0, 10.0, 8.0));
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); 10];
    let object = vec![Pose2::new(12.5, 6.0, 0.0); 10]; // parked
    let log = run_scenario(&world, &robot, &object, 0.15, &quiet_cfg(43)).unwrap();
    let params = clean_params().identify;
    let scans: Vec<_> = (0..10).map(|t| log.scan_at(t).unwrap()).collect();
    for pair in scans.windows(2) {
        let det = objloc_core::identify::identify(
            pair[0],
            pair[1],
            &Pose2::identity(),
            log.range_at(pair[1].t).unwrap(),
            &params,
        );
        assert!(det.is_none(), "static scene produced {det:?}");
    }
    let detections = detect_all(&log, &params).unwrap();
    assert!(detections.iter().all(|d| d.is_none()));
}

#[test]
fn nlos_tick_yields_no_detection() {
    // a wall between the robot and the object: the scan cannot see it and
    // the biased range has nothing to match
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    world
        .walls
        .push(objloc_core::sim::Segment::new(9.0, 5.0, 9.0, 7.0));
    let ticks = 30;
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| Pose2::new(10.5, 5.0 + 0.06 * t as f64, 1.3))
        .collect();
    let mut cfg = quiet_cfg(7);
    cfg.uwb_nlos_bias = 0.5;
    let log = run_scenario(&world, &robot, &object, 0.15, &cfg).unwrap();
    assert!(log.ranges.iter().filter(|r| !r.los).count() > ticks / 2);
    let detections = detect_all(&log, &clean_params().identify).unwrap();
    for (i, d) in detections.iter().enumerate() {
        let t = node_ticks(&log)[i];
        if !log.range_at(t).unwrap().los {
            assert!(d.is_none(), "NLOS tick {t} produced a detection");
        }
    }
}

#[test]
fn identification_tracks_the_object_not_the_distractor() {
    // two movers: the object circles at ~3.5 m, a distractor sweeps at
    // ~5.2 m; the UWB gate should pick the object on nearly every LOS tick
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let ticks = 300;
    world.dynamic.push(objloc_core::sim::DynamicObstacle {
        radius: 0.3,
        positions: (0..ticks)
            .map(|t| Point2::new(13.2, 6.0 + 2.0 * (0.05 * t as f64).sin()))
            .collect(),
    });
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| {
            let a = 0.025 * t as f64;
            Pose2::new(
                8.0 + 3.5 * a.cos(),
                6.0 + 3.5 * a.sin(),
                a + std::f64::consts::FRAC_PI_2,
            )
        })
        .collect();
    let log = run_scenario(&world, &robot, &object, 0.15, &quiet_cfg(23)).unwrap();
    let detections = detect_all(&log, &clean_params().identify).unwrap();
    let mut detected = 0usize;
    let mut correct = 0usize;
    for (i, d) in detections.iter().enumerate() {
        let t = node_ticks(&log)[i];
        if let Some(d) = d {
            detected += 1;
            let truth_body =
                log.truth_robot[t].transform_point_into(&log.truth_object[t].position());
            if d.position.distance(&truth_body) < 0.5 {
                correct += 1;
            }
        }
    }
    assert!(detected > 200, "only {detected} detections");
    let rate = correct as f64 / detected as f64;
    assert!(rate >= 0.95, "correct-match rate {rate}");
}

#[test]
fn gate_accepts_most_directions_on_a_straight_run() {
    // straight-line object, clean world: after warmup the direction gate
    // should pass nearly everything
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let ticks = 300;
    let robot = vec![Pose2::new(8.0, 2.0, std::f64::consts::FRAC_PI_2); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| Pose2::new(3.0 + 0.0334 * t as f64, 6.0, 0.0))
        .collect();
    let mut cfg = quiet_cfg(29);
    cfg.odom_rate_divisor = 4;
    cfg.lidar_rate_divisor = 2;
    cfg.lidar_range_noise_sigma = 0.003;
    let log = run_scenario(&world, &robot, &object, 0.1, &cfg).unwrap();
    let params = clean_params();
    let detections = detect_all(&log, &params.identify).unwrap();
    let result = fuse(&log, &detections, ApproachSpec::Full, &params).unwrap();
    let warmup = 20;
    let (mut measured, mut accepted) = (0, 0);
    for d in result.directions.iter().skip(warmup).flatten() {
        if d.direction.is_some() {
            measured += 1;
            if d.direction_weight > 0.0 {
                accepted += 1;
            }
        }
    }
    assert!(measured > 45, "only {measured} directions measured");
    let rate = accepted as f64 / measured as f64;
    assert!(rate >= 0.9, "gate acceptance rate {rate}");
}

#[test]
fn noise_free_detection_error_is_within_cluster_resolution() {
    // zero noise, small object: identify's position error stays under the
    // adaptive link distance of the object's range band
    let mut world = WorldMap::empty(16.0, 12.0);
    world.walls.extend(WorldMap::boundary_walls(16.0, 12.0));
    let ticks = 80;
    let robot = vec![Pose2::new(8.0, 6.0, 0.0); ticks];
    let object: Vec<Pose2> = (0..ticks)
        .map(|t| Pose2::new(10.2 + 0.01 * t as f64, 4.2 + 0.06 * t as f64, 1.41))
        .collect();
    let mut cfg = quiet_cfg(31);
    cfg.lidar_range_noise_sigma = 0.0;
    cfg.uwb_noise_sigma = 0.0;
    cfg.odom_trans_noise_sigma = 0.0;
    cfg.odom_rot_noise_sigma = 0.0;
    let log = run_scenario(&world, &robot, &object, 0.01, &cfg).unwrap();
    let mut params = clean_params().identify;
    params.min_cluster_size = 1;
    let detections = detect_all(&log, &params).unwrap();
    let mut seen = 0;
    for (i, d) in detections.iter().enumerate() {
        let t = node_ticks(&log)[i];
        if let Some(d) = d {
            seen += 1;
            let truth_body =
                log.truth_robot[t].transform_point_into(&log.truth_object[t].position());
            let d_star = objloc_core::identify::link_distance(
                truth_body.norm(),
                params.angular_resolution,
                &params.band_edges,
            );
            let err = d.position.distance(&truth_body);
            assert!(err <= d_star, "tick {t}: error {err} > d* {d_star}");
        }
    }
    assert!(seen > 50, "only {seen} detections");
}

#[test]
fn evaluate_reports_are_well_formed() {
    let log = clean_log(100, 37);
    for approach in ApproachSpec::ALL {
        let report = evaluate(&log, approach, &clean_params()).unwrap();
        assert!(!report.per_tick.is_empty());
        assert!(report.per_tick.iter().all(|e| e.trans_error_m >= 0.0));
        assert!(report.per_tick.iter().all(|e| e.rot_error_rad >= 0.0));
        assert!(report.summary.trans_mean <= report.summary.trans_max);
    }
}

#[test]
fn error_report_statistics_match_hand_computation() {
    let series = vec![
        TickError {
            tick: 0,
            trans_error_m: 1.0,
            rot_error_rad: 0.1,
        },
        TickError {
            tick: 1,
            trans_error_m: 3.0,
            rot_error_rad: 0.3,
        },
    ];
    let report = ErrorReport::from_series(series);
    assert_eq!(report.summary.trans_mean, 2.0);
    assert_eq!(report.summary.trans_max, 3.0);
    assert!((report.summary.trans_std - 1.0).abs() < 1e-15);
    assert!((report.summary.rot_mean - 0.2).abs() < 1e-15);
}

#[test]
fn detections_shared_across_approaches_match_direct_runs() {
    let log = clean_log(120, 41);
    let params = clean_params();
    let detections = detect_all(&log, &params.identify).unwrap();
    for approach in [ApproachSpec::Full, ApproachSpec::OdomLidar] {
        let shared = evaluate_with_detections(&log, &detections, approach, &params).unwrap();
        let direct = evaluate(&log, approach, &params).unwrap();
        assert_eq!(shared.summary, direct.summary);
    }
}
