//! Experiment document. Precedence is command-line flag, then config file, then default.

use std::path::{Path, PathBuf};

use prescale_core::planner::QosPolicy;
use prescale_core::simcore::{DataCenterSpec, SimPolicy};
use prescale_core::ArimaOrder;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, StageExt};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    /// Directory of hourly pagecounts dumps.
    Pagecounts { dir: PathBuf, project_code: String },
    Synthetic(SyntheticTrace),
}

/// Diurnal generator settings; the noise seed comes from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTrace {
    pub days: u32,
    pub base_rate: f64,
    pub amplitude: f64,
    pub noise_sigma: f64,
    pub interval: u32,
    pub start_epoch: i64,
}

impl Default for SyntheticTrace {
    fn default() -> Self {
        Self { days: 4, base_rate: 100.0, amplitude: 50.0, noise_sigma: 10.0, interval: 5, start_epoch: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Disaggregation {
    pub sigma: f64,
    pub consolidation: u32,
}

impl Default for Disaggregation {
    fn default() -> Self {
        Self { sigma: 1.0, consolidation: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Detection {
    pub k: f64,
    pub min_run: usize,
    pub slot_seconds: u32,
}

impl Default for Detection {
    fn default() -> Self {
        Self { k: 3.0, min_run: prescale_core::anomaly::DEFAULT_MIN_RUN, slot_seconds: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub trace: TraceSource,
    pub disaggregation: Disaggregation,
    pub train_fraction: f64,
    /// Orders as `"p,d,q"` or `"ARIMA(p,d,q)"`.
    pub grid: Vec<String>,
    pub qos: QosPolicy,
    pub headroom: f64,
    pub dc: DataCenterSpec,
    pub sim: SimPolicy,
    pub detection: Detection,
    pub catalog: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_GRID: [&str; 4] = ["1,1,1", "1,2,1", "2,1,2", "2,2,2"];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA,
            trace: TraceSource::Synthetic(SyntheticTrace::default()),
            disaggregation: Disaggregation::default(),
            train_fraction: 0.75,
            grid: DEFAULT_GRID.iter().map(|s| s.to_string()).collect(),
            qos: QosPolicy::default(),
            headroom: 1.0,
            dc: DataCenterSpec::default(),
            sim: SimPolicy::default(),
            detection: Detection::default(),
            catalog: None,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).stage("config")?;
        let cfg: Self = serde_json::from_str(&text).stage("config")?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(CliError::Usage(format!("config schema {} is not supported", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn orders(&self) -> CliResult<Vec<ArimaOrder>> {
        if self.grid.is_empty() {
            return Err(CliError::Usage("grid must name at least one order".into()));
        }
        let mut orders = Vec::with_capacity(self.grid.len());
        for s in &self.grid {
            let o: ArimaOrder = s.parse().map_err(|e: prescale_core::Error| CliError::Usage(e.to_string()))?;
            if orders.contains(&o) {
                return Err(CliError::Usage(format!("{o} appears twice in the grid")));
            }
            orders.push(o);
        }
        Ok(orders)
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        self.orders()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return usage(format!("train_fraction {} must lie in (0, 1)", self.train_fraction));
        }
        if !(self.headroom >= 1.0 && self.headroom.is_finite()) {
            return usage(format!("headroom {} must be at least 1", self.headroom));
        }
        if !(self.detection.k > 0.0) || self.detection.min_run == 0 || self.detection.slot_seconds == 0 {
            return usage("detection needs k > 0, min_run >= 1 and a positive slot".into());
        }
        if let TraceSource::Pagecounts { dir, .. } = &self.trace {
            if !dir.is_dir() {
                return usage(format!("trace directory {} does not exist", dir.display()));
            }
        }
        if let Some(c) = &self.catalog {
            if !c.is_file() {
                return usage(format!("catalog {} does not exist", c.display()));
            }
        }
        self.qos.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.dc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"grid": ["ARIMA(1,0,0)"], "trace": {"kind": "synthetic", "days": 2}}"#).unwrap();
        assert_eq!(cfg.orders().unwrap(), vec![ArimaOrder::new(1, 0, 0)]);
        assert_eq!(cfg.trace, TraceSource::Synthetic(SyntheticTrace { days: 2, ..SyntheticTrace::default() }));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"gird": []}"#).is_err());
        let cfg = ExperimentConfig { grid: vec![], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { grid: vec!["1,1,1".into(), "ARIMA(1,1,1)".into()], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
