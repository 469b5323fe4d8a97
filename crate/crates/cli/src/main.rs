//! `objloc` — scenario simulation, pipeline evaluation, parameter sweeps,
//! and report export for the moving-object localization workbench.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use objloc_core::config::{builtin_scenario, Scenario};
use objloc_core::eval::{
    evaluate, parse_report, parse_table, report_to_string, sweep, table_to_string, write_export,
    ErrorReport, ExportFormat, SweepParameter,
};
use objloc_core::pipeline::ApproachSpec;
use objloc_core::sim::SensorLog;

#[derive(Parser)]
#[command(
    name = "objloc",
    about = "Moving-object localization workbench: simulate scenarios, fuse \
             odometry + UWB + LiDAR, and score against ground truth",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Jsonl => ExportFormat::JsonLines,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its sensor log.
    Simulate {
        /// Scenario file path, or a built-in name (static-robot, moving-robot).
        #[arg(long)]
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output log path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one approach over a log (or a freshly simulated scenario) and
    /// write the per-tick error report.
    Run {
        /// Sensor log produced by `simulate`.
        #[arg(long, conflicts_with = "scenario")]
        log: Option<PathBuf>,
        /// Scenario to simulate on the fly instead of a stored log.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// pure_odom, odom_uwb, odom_lidar, odom_uwb_lidar_no_direction,
        /// odom_uwb_lidar_no_rejection, or full.
        #[arg(long, default_value = "full")]
        approach: String,
        /// Override the outlier-rejection threshold ϑ (radians).
        #[arg(long)]
        vartheta: Option<f64>,
        /// Override the direction information weight ω.
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Evaluate a parameter over several values, one run per value.
    Sweep {
        #[arg(long, conflicts_with = "scenario")]
        log: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "full")]
        approach: String,
        /// vartheta or omega.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values, e.g. 0.1,0.2,0.3,0.4,0.5.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Re-encode a report or sweep table between csv and jsonl.
    Export {
        /// Input report/table file.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Format of the input file.
        #[arg(long, value_enum)]
        from: FormatArg,
        /// Output format.
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_scenario(spec: &str, seed: Option<u64>) -> Result<Scenario> {
    let text = match builtin_scenario(spec) {
        Some(text) => text.to_string(),
        None => std::fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?,
    };
    let mut scenario = Scenario::from_toml(&text)?;
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    Ok(scenario)
}

/// A log from `--log` or by simulating `--scenario`, plus pipeline params
/// (scenario files carry their own estimation parameters; logs use defaults).
fn load_log(
    log: &Option<PathBuf>,
    scenario: &Option<String>,
    seed: Option<u64>,
) -> Result<(SensorLog, objloc_core::pipeline::PipelineParams)> {
    match (log, scenario) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let log = SensorLog::from_text(&text)?;
            let mut params = objloc_core::pipeline::PipelineParams::default();
            params.identify.angular_resolution = log.config.lidar_angular_resolution;
            Ok((log, params))
        }
        (None, Some(spec)) => {
            let scenario = load_scenario(spec, seed)?;
            let log = scenario.simulate()?;
            Ok((log, scenario.pipeline))
        }
        _ => bail!("exactly one of --log or --scenario is required"),
    }
}

fn parse_approach(name: &str) -> Result<ApproachSpec> {
    ApproachSpec::parse(name).with_context(|| {
        let names: Vec<&str> = ApproachSpec::ALL.iter().map(|a| a.name()).collect();
        format!("unknown approach {name:?}; expected one of {}", names.join(", "))
    })
}

fn print_summary(report: &ErrorReport) {
    let s = &report.summary;
    println!(
        "trans error: mean {:.4} m, std {:.4}, max {:.4}",
        s.trans_mean, s.trans_std, s.trans_max
    );
    println!(
        "rot error:   mean {:.4} rad, std {:.4}, max {:.4}",
        s.rot_mean, s.rot_std, s.rot_max
    );
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { scenario, seed, out } => {
            let scenario = load_scenario(&scenario, seed)?;
            let log = scenario.simulate()?;
            write_export(&out, &log.to_text())?;
            println!(
                "wrote {} ({} ticks, {} scans, {} ranges)",
                out.display(),
                log.ticks,
                log.scans.len(),
                log.ranges.len()
            );
        }
        Command::Run {
            log,
            scenario,
            seed,
            approach,
            vartheta,
            omega,
            out,
            format,
        } => {
            let (log, mut params) = load_log(&log, &scenario, seed)?;
            if let Some(v) = vartheta {
                params.gate.vartheta = v;
            }
            if let Some(w) = omega {
                params.gate.omega = w;
            }
            let approach = parse_approach(&approach)?;
            let report = evaluate(&log, approach, &params)?;
            write_export(&out, &report_to_string(&report, format.into()))?;
            println!("approach {approach}: wrote {}", out.display());
            print_summary(&report);
        }
        Command::Sweep {
            log,
            scenario,
            seed,
            approach,
            parameter,
            values,
            out,
            format,
        } => {
            let (log, params) = load_log(&log, &scenario, seed)?;
            let approach = parse_approach(&approach)?;
            let parameter = SweepParameter::parse(&parameter)
                .with_context(|| format!("unknown parameter {parameter:?} (vartheta | omega)"))?;
            let rows = sweep(&log, approach, &params, parameter, &values)?;
            write_export(&out, &table_to_string(&rows, format.into()))?;
            println!("wrote {}", out.display());
            for (value, report) in &rows {
                let s = &report.summary;
                println!(
                    "  {value}: trans {:.4} ± {:.4} m, rot {:.4} ± {:.4} rad",
                    s.trans_mean, s.trans_std, s.rot_mean, s.rot_std
                );
            }
        }
        Command::Export {
            input,
            from,
            format,
            out,
        } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            // a report has the tick header/rows; a table has the value header
            let content = match parse_report(&text, from.into()) {
                Ok(report) => report_to_string(&report, format.into()),
                Err(_) => {
                    let rows = parse_table(&text, from.into())?;
                    let rebuilt: Vec<(f64, ErrorReport)> = rows
                        .into_iter()
                        .map(|(v, summary)| {
                            (v, ErrorReport {
                                per_tick: Vec::new(),
                                summary,
                            })
                        })
                        .collect();
                    table_to_string(&rebuilt, format.into())
                }
            };
            write_export(&out, &content)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
