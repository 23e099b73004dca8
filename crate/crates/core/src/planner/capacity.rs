use serde::{Deserialize, Serialize};

use crate::anomaly::{Alarm, Direction};
use crate::error::{Error, Result};
use crate::trace::TimeSeries;

/// Above-baseline alarms less likely than this to be transient override the forecast.
pub const OVERRIDE_TRANSIENCY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosPolicy {
    /// Seconds of CPU per request.
    pub service_time: f64,
    pub response_target: f64,
    pub cores_per_vm: u32,
    pub ram_per_vm: f64,
    /// Smallest allocation while any load is expected.
    pub min_vms: u32,
}

impl Default for QosPolicy {
    fn default() -> Self {
        Self { service_time: 0.100, response_target: 0.500, cores_per_vm: 1, ram_per_vm: 2.0, min_vms: 1 }
    }
}

impl QosPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.service_time > 0.0 && self.service_time <= self.response_target) {
            return Err(Error::invalid("QoS needs 0 < service_time <= response_target"));
        }
        if self.cores_per_vm == 0 || !(self.ram_per_vm >= 0.0) {
            return Err(Error::invalid("QoS VM shape needs at least one core and non-negative RAM"));
        }
        Ok(())
    }

    /// Requests per second one VM sustains.
    pub fn vm_throughput(&self) -> f64 {
        f64::from(self.cores_per_vm) / self.service_time
    }
}

/// Vendor-neutral capacity request for one provisioning window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceRequirement {
    pub vm_count: u32,
    pub cores_per_vm: u32,
    pub ram_per_vm: f64,
    pub valid_from: i64,
    pub valid_until: i64,
}

/// `ceil(headroom * peak_rate / vm_throughput)`, at least `min_vms` when the rate is positive.
pub fn required_vms(peak_rate: f64, qos: &QosPolicy, headroom: f64) -> Result<u32> {
    qos.validate()?;
    if !(peak_rate >= 0.0 && peak_rate.is_finite()) {
        return Err(Error::invalid(format!("peak rate {peak_rate} must be a non-negative number")));
    }
    if !(headroom >= 1.0 && headroom.is_finite()) {
        return Err(Error::invalid(format!("headroom {headroom} must be at least 1")));
    }
    if peak_rate == 0.0 {
        return Ok(0);
    }
    let needed = headroom * peak_rate / qos.vm_throughput();
    // Absorb representation error so exact multiples of capacity do not round up.
    let vms = (needed - 1e-9 * needed.max(1.0)).ceil().max(0.0);
    if vms > f64::from(u32::MAX) {
        return Err(Error::Capacity(format!("{needed} VMs cannot be represented")));
    }
    Ok((vms as u32).max(qos.min_vms))
}

/// Sizes a window from its peak forecast rate. Above-baseline alarms that
/// are unlikely to be transient replace the forecast peak when higher.
pub fn plan_window(
    forecast: &TimeSeries,
    qos: &QosPolicy,
    alarms: &[Alarm],
    headroom: f64,
) -> Result<ResourceRequirement> {
    if forecast.is_empty() {
        return Err(Error::insufficient("empty forecast window"));
    }
    let forecast_peak = forecast.rates().fold(0.0f64, f64::max);
    let peak = alarms
        .iter()
        .filter(|a| a.direction == Direction::Above && a.transiency < OVERRIDE_TRANSIENCY)
        .map(|a| a.observed)
        .fold(forecast_peak, f64::max);
    Ok(ResourceRequirement {
        vm_count: required_vms(peak, qos, headroom)?,
        cores_per_vm: qos.cores_per_vm,
        ram_per_vm: qos.ram_per_vm,
        valid_from: forecast.start_epoch,
        valid_until: forecast.end_epoch(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn alarm(observed: f64, transiency: f64, direction: Direction) -> Alarm {
        Alarm { ts: 0, observed, expected: 50.0, severity: 5.0, transiency, direction }
    }

    #[test]
    fn ceiling_examples() {
        let q = QosPolicy::default();
        assert_eq!(required_vms(0.0, &q, 1.0).unwrap(), 0);
        assert_eq!(required_vms(25.0, &q, 1.0).unwrap(), 3);
        assert_eq!(required_vms(10.0, &q, 1.0).unwrap(), 1);
        assert_eq!(required_vms(10.0, &q, 1.05).unwrap(), 2);
        assert_eq!(required_vms(30.0, &q, 1.0).unwrap(), 3);
        assert_eq!(required_vms(0.01, &q, 1.0).unwrap(), 1);
    }

    #[test]
    fn min_vms_only_with_load() {
        let q = QosPolicy { min_vms: 2, ..QosPolicy::default() };
        assert_eq!(required_vms(0.0, &q, 1.0).unwrap(), 0);
        assert_eq!(required_vms(1.0, &q, 1.0).unwrap(), 2);
    }

    #[test]
    fn bad_inputs() {
        let q = QosPolicy::default();
        assert!(required_vms(-1.0, &q, 1.0).is_err());
        assert!(required_vms(1.0, &q, 0.9).is_err());
        let slow = QosPolicy { service_time: 1.0, ..q };
        assert!(required_vms(1.0, &slow, 1.0).is_err());
    }

    #[test]
    fn window_examples() {
        let q = QosPolicy::default();
        let flat = TimeSeries::new(600, 5, vec![250.0; 60]).unwrap();
        let r = plan_window(&flat, &q, &[], 1.0).unwrap();
        assert_eq!(r.vm_count, 5);
        assert_eq!((r.valid_from, r.valid_until), (600, 900));
        let persistent = [alarm(120.0, 0.2, Direction::Above)];
        assert_eq!(plan_window(&flat, &q, &persistent, 1.0).unwrap().vm_count, 12);
        let transient = [alarm(120.0, 0.9, Direction::Above)];
        assert_eq!(plan_window(&flat, &q, &transient, 1.0).unwrap().vm_count, 5);
        let dip = [alarm(1.0, 0.0, Direction::Below)];
        assert_eq!(plan_window(&flat, &q, &dip, 1.0).unwrap().vm_count, 5);
    }

    proptest! {
        #[test]
        fn monotone_in_rate_and_headroom(a in 0.0f64..5000.0, da in 0.0f64..500.0, h in 1.0f64..3.0, dh in 0.0f64..1.0) {
            let q = QosPolicy::default();
            prop_assert!(required_vms(a, &q, h).unwrap() <= required_vms(a + da, &q, h).unwrap());
            prop_assert!(required_vms(a, &q, h).unwrap() <= required_vms(a, &q, h + dh).unwrap());
        }

        #[test]
        fn window_capacity_covers_forecast(values in prop::collection::vec(0.0f64..5000.0, 1..60), h in 1.0f64..2.0) {
            let q = QosPolicy::default();
            let f = TimeSeries::new(0, 5, values.clone()).unwrap();
            let r = plan_window(&f, &q, &[], h).unwrap();
            let peak = values.iter().cloned().fold(0.0, f64::max) / 5.0;
            prop_assert!(f64::from(r.vm_count) * q.vm_throughput() >= peak * (1.0 - 1e-9));
        }
    }
}
