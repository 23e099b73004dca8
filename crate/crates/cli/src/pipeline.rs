//! The end-to-end experiment and the artifact files it leaves behind.

use std::fs;
use std::path::Path;

use prescale_core::anomaly::{build_baseline_with, detect, Alarm, BaselineOptions, BaselineProfile};
use prescale_core::planner::{plan_window, select_offers, ProviderOffer, ProvisioningPlan, ResourceRequirement};
use prescale_core::seed::stage_seed;
use prescale_core::simcore::{
    compare_models, run, schedule_from_plans, static_baseline, ComparisonTable, ModelRun, ProvisioningSchedule,
    SimMetrics,
};
use prescale_core::trace::{
    disaggregate, ingest_directory, split_train_test, synth_diurnal, DisaggregationParams, IngestReport, SynthParams,
};
use prescale_core::tsmodel::{grid_select, GridFailure};
use prescale_core::{ArimaModel, ArimaOrder, Error, FitReport, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TraceSource};
use crate::error::{CliError, CliResult, StageExt};

pub const REPORT_SCHEMA: u32 = 1;

/// File-name friendly form of an order, e.g. `arima_1_2_1`.
pub fn order_label(order: ArimaOrder) -> String {
    format!("arima_{}_{}_{}", order.p, order.d, order.q)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).stage("write")?;
    }
    fs::write(path, bytes).stage("write")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).stage("write")?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn series_csv(series: &TimeSeries) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).stage("write")?;
    Ok(buf)
}

pub fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let file = fs::File::open(path).stage("read")?;
    TimeSeries::read_csv(std::io::BufReader::new(file)).stage("read")
}

/// Builds the 5 s workload the config describes.
pub fn load_series(cfg: &ExperimentConfig) -> CliResult<(TimeSeries, Option<IngestReport>)> {
    match &cfg.trace {
        TraceSource::Synthetic(s) => {
            let params = SynthParams {
                days: s.days,
                base_rate: s.base_rate,
                amplitude: s.amplitude,
                noise_sigma: s.noise_sigma,
                seed: stage_seed(cfg.seed, "synthetic"),
                interval: s.interval,
                start_epoch: s.start_epoch,
            };
            Ok((synth_diurnal(&params).stage("synthetic")?, None))
        }
        TraceSource::Pagecounts { dir, project_code } => {
            let ingest = ingest_directory(dir, project_code).stage("ingest")?;
            let params = DisaggregationParams {
                sigma: cfg.disaggregation.sigma,
                seed: stage_seed(cfg.seed, "disaggregate"),
                consolidation: cfg.disaggregation.consolidation,
                origin_epoch: ingest.report.origin_epoch,
            };
            let series = disaggregate(&ingest.hourly, &params).stage("disaggregate")?;
            Ok((series, Some(ingest.report)))
        }
    }
}

pub fn load_catalog(path: &Path) -> CliResult<Vec<ProviderOffer>> {
    let text = fs::read_to_string(path).stage("catalog")?;
    serde_json::from_str(&text).stage("catalog")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowForecast {
    pub requirement: ResourceRequirement,
    /// Forecast samples covering `[valid_from, valid_from + plan_horizon)`.
    pub forecast: Vec<f64>,
    /// Above-baseline alarms seen in the period before the decision.
    pub alarms: usize,
}

/// Forecasts and sizes every provisioning window of the test span.
///
/// The decision for window `W` is taken at `W - period` with only earlier
/// observations, and covers `W .. W + plan_horizon`.
pub fn rolling_plans(
    model: &ArimaModel,
    full: &TimeSeries,
    test_start: usize,
    cfg: &ExperimentConfig,
    alarms: &[Alarm],
) -> CliResult<Vec<WindowForecast>> {
    let policy = &cfg.sim;
    let interval = i64::from(full.interval);
    let period = i64::from(policy.provisioning_period);
    let horizon = i64::from(policy.plan_horizon);
    if period % interval != 0 || horizon % interval != 0 {
        return Err(CliError::Usage(format!(
            "sample interval {interval}s must divide the provisioning period and plan horizon"
        )));
    }
    let lead = (period / interval) as usize;
    let span = (horizon / interval) as usize;
    if test_start < lead {
        return Err(CliError::Stage {
            stage: "forecast",
            source: Error::InsufficientData("training span is shorter than one provisioning period".into()),
        });
    }

    let mut seen = test_start - lead;
    let mut state = model.condition(&full.values[..seen]).stage("forecast")?;
    let mut windows = Vec::new();
    let mut start = test_start;
    let mut alarm_cursor = 0;
    while start < full.len() {
        let decision = start - lead;
        while seen < decision {
            state.advance(full.values[seen]);
            seen += 1;
        }
        let predicted = state.forecast(lead + span).values;
        let window_start = full.epoch_at(start);
        let decided_at = window_start - period;
        while alarm_cursor < alarms.len() && alarms[alarm_cursor].ts < decided_at - period {
            alarm_cursor += 1;
        }
        let recent: Vec<Alarm> =
            alarms[alarm_cursor..].iter().take_while(|a| a.ts < decided_at).copied().collect();
        let forecast = TimeSeries::new(window_start, full.interval, predicted[lead..].to_vec()).stage("forecast")?;
        let mut requirement = plan_window(&forecast, &cfg.qos, &recent, cfg.headroom).stage("plan")?;
        let end = (start + lead).min(full.len());
        requirement.valid_until = full.epoch_at(end);
        windows.push(WindowForecast { requirement, forecast: forecast.values, alarms: recent.len() });
        start = end;
    }
    Ok(windows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    pub order: ArimaOrder,
    pub fit: FitReport,
    pub holdout_mse: f64,
    pub vm_hours: f64,
    pub rejected_requests: u64,
    pub served_requests: u64,
    pub peak_vms: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hourly_cost: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub seed: u64,
    pub samples: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub interval: u32,
    pub alarms: usize,
    pub models: Vec<ModelSummary>,
    pub failures: Vec<GridFailure>,
    pub table: ComparisonTable,
}

struct ModelOutcome {
    summary: ModelSummary,
    windows: Vec<WindowForecast>,
    schedule: ProvisioningSchedule,
    plans: Option<Vec<ProvisioningPlan>>,
    metrics: SimMetrics,
}

/// Runs every stage and writes the output tree under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    let orders = cfg.orders()?;
    let out = cfg.out.as_path();
    fs::create_dir_all(out).stage("write")?;
    let recorded = ExperimentConfig { out: ".".into(), ..cfg.clone() };
    write_json(&out.join("config.json"), &recorded)?;

    let (series, ingest) = load_series(cfg)?;
    write_file(&out.join("series.csv"), &series_csv(&series)?)?;
    if let Some(report) = &ingest {
        write_json(&out.join("ingest_report.json"), report)?;
    }
    let catalog = cfg.catalog.as_deref().map(load_catalog).transpose()?;

    let (train, test) = split_train_test(&series, cfg.train_fraction).stage("split")?;
    let outcome = grid_select(&train.values, &test.values, &orders).stage("fit")?;
    for entry in &outcome.ranked {
        let path = out.join("models").join(format!("{}.json", order_label(entry.report.order)));
        write_file(&path, format!("{}\n", entry.model.to_json().stage("fit")?).as_bytes())?;
    }
    write_json(&out.join("models").join("failures.json"), &outcome.failures)?;

    let opts = BaselineOptions { slot_seconds: cfg.detection.slot_seconds, ..BaselineOptions::default() };
    let profile: BaselineProfile = build_baseline_with(&train, &opts).stage("baseline")?;
    write_file(&out.join("profile.json"), format!("{}\n", profile.to_json().stage("baseline")?).as_bytes())?;
    let alarms = detect(&series, &profile, cfg.detection.k, cfg.detection.min_run).stage("detect")?;
    write_file(&out.join("alarms.jsonl"), &alarm_lines(&alarms)?)?;

    let test_start = train.len();
    let results: Vec<CliResult<ModelOutcome>> = outcome
        .ranked
        .par_iter()
        .map(|entry| {
            let windows = rolling_plans(&entry.model, &series, test_start, cfg, &alarms)?;
            let reqs: Vec<ResourceRequirement> = windows.iter().map(|w| w.requirement).collect();
            let plans = match &catalog {
                Some(offers) => Some(
                    reqs.iter()
                        .map(|r| select_offers(r, offers, f64::from(cfg.sim.provisioning_period)))
                        .collect::<Result<Vec<_>, _>>()
                        .stage("plan")?,
                ),
                None => None,
            };
            let schedule = schedule_from_plans(&reqs, &cfg.sim).stage("schedule")?;
            let metrics = run(&test, &schedule, &cfg.dc, &cfg.sim).stage("simulate")?;
            let order = entry.report.order;
            let summary = ModelSummary {
                label: order_label(order),
                order,
                fit: entry.report,
                holdout_mse: entry.holdout_mse,
                vm_hours: metrics.vm_hours,
                rejected_requests: metrics.rejected_requests,
                served_requests: metrics.served_requests,
                peak_vms: schedule.max_target(),
                hourly_cost: plans.as_ref().map(|p| p.iter().map(|x| x.total_hourly_cost).fold(0.0, f64::max)),
            };
            Ok(ModelOutcome { summary, windows, schedule, plans, metrics })
        })
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        outcomes.push(r?);
    }

    let baseline = static_baseline(&test, &cfg.dc, &cfg.sim).stage("baseline-sim")?;
    let mut runs: Vec<ModelRun> = outcomes
        .iter()
        .map(|o| ModelRun { label: o.summary.order.to_string(), mse: o.summary.holdout_mse, metrics: o.metrics.clone() })
        .collect();
    let table = compare_models(&mut runs, baseline.vm_count, &baseline.metrics).stage("compare")?;

    for (o, r) in outcomes.iter().zip(&runs) {
        let label = &o.summary.label;
        write_json(&out.join("schedules").join(format!("{label}.json")), &o.schedule)?;
        write_json(&out.join("schedules").join(format!("{label}_windows.json")), &o.windows)?;
        if let Some(plans) = &o.plans {
            write_json(&out.join("schedules").join(format!("{label}_plans.json")), plans)?;
        }
        write_metrics(out, label, &r.metrics)?;
    }
    write_metrics(out, "static", &baseline.metrics)?;

    let mut table_csv = Vec::new();
    table.write_csv(&mut table_csv).stage("write")?;
    write_file(&out.join("table.csv"), &table_csv)?;

    let report = ExperimentReport {
        schema: REPORT_SCHEMA,
        seed: cfg.seed,
        samples: series.len(),
        train_samples: train.len(),
        test_samples: test.len(),
        interval: series.interval,
        alarms: alarms.len(),
        models: outcomes.into_iter().map(|o| o.summary).collect(),
        failures: outcome.failures,
        table,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

fn write_metrics(out: &Path, label: &str, metrics: &SimMetrics) -> CliResult<()> {
    let summary = SimMetrics { utilization: Vec::new(), ..metrics.clone() };
    write_json(&out.join("metrics").join(format!("{label}.json")), &summary)?;
    let mut csv = Vec::new();
    metrics.write_utilization_csv(&mut csv).stage("write")?;
    write_file(&out.join("utilization").join(format!("{label}.csv")), &csv)
}

pub fn alarm_lines(alarms: &[Alarm]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    for a in alarms {
        buf.extend(serde_json::to_vec(a).stage("write")?);
        buf.push(b'\n');
    }
    Ok(buf)
}

/// Simulates one schedule, used by the `simulate` subcommand.
pub fn simulate_one(
    workload: &TimeSeries,
    schedule: &ProvisioningSchedule,
    cfg: &ExperimentConfig,
) -> CliResult<SimMetrics> {
    run(workload, schedule, &cfg.dc, &cfg.sim).stage("simulate")
}
