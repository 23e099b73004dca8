use std::io::Write;

use serde::{Deserialize, Serialize};

use super::engine::SimMetrics;
use crate::error::{Error, Result};

/// One model's simulated outcome before normalisation.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub label: String,
    pub mse: f64,
    pub metrics: SimMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub mse: f64,
    pub norm_vm_hours: f64,
    pub norm_rejections: f64,
    pub vm_hours: f64,
    pub rejected_requests: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline_vm_count: u32,
    pub baseline_vm_hours: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Normalises VM-hours by the static baseline and rejections by the worst model.
pub fn compare_models(runs: &mut [ModelRun], baseline_vm_count: u32, baseline: &SimMetrics) -> Result<ComparisonTable> {
    if baseline.vm_hours <= 0.0 {
        return Err(Error::invalid("static baseline consumed no VM-hours; nothing to normalise by"));
    }
    let worst = runs.iter().map(|r| r.metrics.rejected_requests).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(runs.len());
    for r in runs.iter_mut() {
        r.metrics.normalized_vm_hours = r.metrics.vm_hours / baseline.vm_hours;
        r.metrics.normalized_rejections =
            if worst == 0 { 0.0 } else { r.metrics.rejected_requests as f64 / worst as f64 };
        rows.push(ComparisonRow {
            model: r.label.clone(),
            mse: r.mse,
            norm_vm_hours: r.metrics.normalized_vm_hours,
            norm_rejections: r.metrics.normalized_rejections,
            vm_hours: r.metrics.vm_hours,
            rejected_requests: r.metrics.rejected_requests,
        });
    }
    Ok(ComparisonTable { baseline_vm_count, baseline_vm_hours: baseline.vm_hours, rows })
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "model,mse,norm_vm_hours,norm_rejections")?;
        for r in &self.rows {
            writeln!(out, "{},{:.5},{:.4},{:.2}", r.model, r.mse, r.norm_vm_hours, r.norm_rejections)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(vm_hours: f64, rejected: u64) -> SimMetrics {
        SimMetrics {
            vm_hours,
            offered_requests: 100,
            served_requests: 100 - rejected,
            rejected_requests: rejected,
            normalized_vm_hours: 0.0,
            normalized_rejections: 0.0,
            utilization: Vec::new(),
        }
    }

    #[test]
    fn normalises_and_formats() {
        let mut runs = vec![
            ModelRun { label: "ARIMA(1,0,0)".into(), mse: 55.756671, metrics: metrics(8.0, 10) },
            ModelRun { label: "ARIMA(0,1,0)".into(), mse: 60.0, metrics: metrics(9.0, 40) },
        ];
        let t = compare_models(&mut runs, 15, &metrics(10.0, 0)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "model,mse,norm_vm_hours,norm_rejections\nARIMA(1,0,0),55.75667,0.8000,0.25\nARIMA(0,1,0),60.00000,0.9000,1.00\n"
        );
        assert_eq!(runs[1].metrics.normalized_rejections, 1.0);
    }

    #[test]
    fn no_rejections_anywhere_reads_zero() {
        let mut runs = vec![ModelRun { label: "m".into(), mse: 1.0, metrics: metrics(5.0, 0) }];
        let t = compare_models(&mut runs, 1, &metrics(10.0, 0)).unwrap();
        assert_eq!(t.rows[0].norm_rejections, 0.0);
    }
}
