use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use prescale_core::anomaly::{build_baseline_with, detect, Alarm, BaselineOptions, BaselineProfile};
use prescale_core::planner::{plan_window, select_offers};
use prescale_core::simcore::{static_baseline, ProvisioningSchedule};
use prescale_core::trace::{split_train_test, FileStatus, DEFAULT_INTERVAL};
use prescale_core::tsmodel::grid_select;
use prescale_core::{ArimaModel, ArimaOrder};
use serde::Serialize;

use crate::config::{ExperimentConfig, TraceSource};
use crate::error::{CliError, CliResult, StageExt, EXIT_ALARMS, EXIT_OK, EXIT_USAGE};
use crate::pipeline::{
    alarm_lines, load_catalog, load_series, order_label, read_series, run_experiment, series_csv, simulate_one,
    write_file, write_json, ExperimentReport,
};

/// Workload prediction and elastic provisioning experiments.
#[derive(Debug, Parser)]
#[command(name = "prescale", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON). Flags win over it; it wins over defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn hourly pagecounts dumps (or the synthetic generator) into a 5 s series.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        project: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Fit the order grid and rank it by holdout MSE.
    Fit {
        #[arg(long)]
        series: PathBuf,
        /// Order such as `1,2,1`; repeat for a grid.
        #[arg(long = "order")]
        orders: Vec<ArimaOrder>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Forecast from a saved model, optionally conditioned on fresh history.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
        /// Steps ahead.
        #[arg(long)]
        horizon: usize,
    },
    /// Stream observations against a baseline and print JSON-lines alarms.
    Detect {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, conflicts_with = "train")]
        profile: Option<PathBuf>,
        /// Build the baseline from this history instead of a saved profile.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        min_run: Option<usize>,
    },
    /// Size one window from a forecast and optionally pick provider offers.
    Plan {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        alarms: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        headroom: Option<f64>,
    },
    /// Replay a workload against a schedule, a fixed VM count, or the static baseline.
    Simulate {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long, conflicts_with_all = ["vms", "static_baseline"])]
        schedule: Option<PathBuf>,
        #[arg(long, conflicts_with = "static_baseline")]
        vms: Option<u32>,
        #[arg(long = "static")]
        static_baseline: bool,
    },
    /// Run the full pipeline and write every artifact.
    Experiment,
    /// Print the comparison table of a finished experiment.
    Report {
        #[arg(long)]
        json: bool,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("prescale: {e}");
            e.exit_code()
        }
    }
}

fn resolve(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(dir) => write_file(&dir.join(name), bytes),
        None => std::io::stdout().write_all(bytes).stage("write"),
    }
}

fn pretty<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).stage("write")?;
    v.push(b'\n');
    Ok(v)
}

pub fn execute(cli: Cli) -> CliResult<i32> {
    let mut cfg = resolve(&cli.common)?;
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Ingest { input, project, sigma } => {
            if let Some(dir) = input {
                let project_code = match (project, &cfg.trace) {
                    (Some(p), _) => p,
                    (None, TraceSource::Pagecounts { project_code, .. }) => project_code.clone(),
                    (None, _) => return Err(CliError::Usage("--input needs --project".into())),
                };
                cfg.trace = TraceSource::Pagecounts { dir, project_code };
            }
            if let Some(s) = sigma {
                cfg.disaggregation.sigma = s;
            }
            cfg.validate()?;
            let (series, report) = load_series(&cfg)?;
            let dir = cfg.out.as_path();
            write_file(&dir.join("series.csv"), &series_csv(&series)?)?;
            if let Some(r) = &report {
                write_json(&dir.join("ingest_report.json"), r)?;
                for f in r.files.iter().filter(|f| f.status != FileStatus::Ok) {
                    eprintln!("skipped {} ({:?}, {} of {} lines malformed)", f.name, f.status, f.malformed, f.lines);
                }
            }
            println!("{} samples at {}s written to {}", series.len(), series.interval, dir.join("series.csv").display());
            Ok(EXIT_OK)
        }
        Command::Fit { series, orders, train_fraction } => {
            let series = read_series(&series)?;
            let orders = if orders.is_empty() { cfg.orders()? } else { orders };
            let fraction = train_fraction.unwrap_or(cfg.train_fraction);
            let (train, test) = split_train_test(&series, fraction).stage("split")?;
            let outcome = grid_select(&train.values, &test.values, &orders).stage("fit")?;
            let dir = cfg.out.as_path();
            let mut table = String::from("order,holdout_mse,in_sample_mse,converged,iterations\n");
            for e in &outcome.ranked {
                let path = dir.join("models").join(format!("{}.json", order_label(e.report.order)));
                write_file(&path, format!("{}\n", e.model.to_json().stage("fit")?).as_bytes())?;
                table.push_str(&format!(
                    "{},{:.5},{:.5},{},{}\n",
                    e.report.order, e.holdout_mse, e.report.mse, e.report.converged, e.report.iterations
                ));
            }
            for f in &outcome.failures {
                eprintln!("{} failed: {}", f.order, f.error);
            }
            write_file(&dir.join("fit.csv"), table.as_bytes())?;
            print!("{table}");
            Ok(EXIT_OK)
        }
        Command::Forecast { model, history, horizon } => {
            let text = std::fs::read_to_string(&model).stage("model")?;
            let mut m = ArimaModel::from_json(&text).stage("model")?;
            let (start, interval) = match history {
                Some(h) => {
                    let h = read_series(&h)?;
                    m = m.condition(&h.values).stage("forecast")?;
                    (h.end_epoch(), h.interval)
                }
                None => (0, DEFAULT_INTERVAL),
            };
            let f = m.forecast(horizon);
            let series = prescale_core::TimeSeries::new(start, interval, f.values).stage("forecast")?;
            if f.clamped {
                eprintln!("negative forecasts were clamped to zero");
            }
            emit(out, "forecast.csv", &series_csv(&series)?)?;
            Ok(EXIT_OK)
        }
        Command::Detect { stream, profile, train, k, min_run } => {
            let stream = read_series(&stream)?;
            let profile: BaselineProfile = match (profile, train) {
                (Some(p), _) => {
                    BaselineProfile::from_json(&std::fs::read_to_string(p).stage("profile")?).stage("profile")?
                }
                (None, Some(t)) => {
                    let opts =
                        BaselineOptions { slot_seconds: cfg.detection.slot_seconds, ..BaselineOptions::default() };
                    build_baseline_with(&read_series(&t)?, &opts).stage("baseline")?
                }
                (None, None) => {
                    return Err(CliError::Stage {
                        stage: "baseline",
                        source: prescale_core::Error::InsufficientData(
                            "detect needs --profile or --train history".into(),
                        ),
                    })
                }
            };
            let alarms = detect(
                &stream,
                &profile,
                k.unwrap_or(cfg.detection.k),
                min_run.unwrap_or(cfg.detection.min_run),
            )
            .stage("detect")?;
            emit(out, "alarms.jsonl", &alarm_lines(&alarms)?)?;
            Ok(if alarms.is_empty() { EXIT_OK } else { EXIT_ALARMS })
        }
        Command::Plan { forecast, alarms, catalog, headroom } => {
            let forecast = read_series(&forecast)?;
            let alarms: Vec<Alarm> = match alarms {
                Some(p) => std::fs::read_to_string(p)
                    .stage("alarms")?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(serde_json::from_str)
                    .collect::<Result<_, _>>()
                    .stage("alarms")?,
                None => Vec::new(),
            };
            let requirement =
                plan_window(&forecast, &cfg.qos, &alarms, headroom.unwrap_or(cfg.headroom)).stage("plan")?;
            let catalog = catalog.or(cfg.catalog.clone());
            let plan = match catalog {
                Some(path) => Some(
                    select_offers(&requirement, &load_catalog(&path)?, f64::from(cfg.sim.provisioning_period))
                        .stage("plan")?,
                ),
                None => None,
            };
            #[derive(Serialize)]
            struct PlanOutput {
                requirement: prescale_core::planner::ResourceRequirement,
                #[serde(skip_serializing_if = "Option::is_none")]
                plan: Option<prescale_core::planner::ProvisioningPlan>,
            }
            emit(out, "plan.json", &pretty(&PlanOutput { requirement, plan })?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { workload, schedule, vms, static_baseline: use_static } => {
            let workload = read_series(&workload)?;
            let metrics = if use_static {
                let b = static_baseline(&workload, &cfg.dc, &cfg.sim).stage("simulate")?;
                eprintln!("static baseline: {} VMs", b.vm_count);
                b.metrics
            } else {
                let schedule = match (schedule, vms) {
                    (Some(p), _) => {
                        serde_json::from_str::<ProvisioningSchedule>(&std::fs::read_to_string(p).stage("schedule")?)
                            .stage("schedule")?
                    }
                    (None, Some(n)) => ProvisioningSchedule::constant(workload.start_epoch, n),
                    (None, None) => return Err(CliError::Usage("simulate needs --schedule, --vms or --static".into())),
                };
                simulate_one(&workload, &schedule, &cfg)?
            };
            if let Some(dir) = out {
                let mut csv = Vec::new();
                metrics.write_utilization_csv(&mut csv).stage("write")?;
                write_file(&dir.join("utilization.csv"), &csv)?;
            }
            let summary = prescale_core::simcore::SimMetrics { utilization: Vec::new(), ..metrics };
            emit(out, "metrics.json", &pretty(&summary)?)?;
            Ok(EXIT_OK)
        }
        Command::Experiment => {
            let report = run_experiment(&cfg)?;
            let mut csv = Vec::new();
            report.table.write_csv(&mut csv).stage("write")?;
            std::io::stdout().write_all(&csv).stage("write")?;
            Ok(EXIT_OK)
        }
        Command::Report { json } => {
            let path = cfg.out.join("report.json");
            let report: ExperimentReport =
                serde_json::from_str(&std::fs::read_to_string(&path).stage("report")?).stage("report")?;
            if json {
                std::io::stdout().write_all(&pretty(&report.table)?).stage("write")?;
            } else {
                let mut csv = Vec::new();
                report.table.write_csv(&mut csv).stage("write")?;
                std::io::stdout().write_all(&csv).stage("write")?;
                println!("static baseline: {} VMs, {:.4} VM-hours", report.table.baseline_vm_count, report.table.baseline_vm_hours);
            }
            Ok(EXIT_OK)
        }
    }
}
