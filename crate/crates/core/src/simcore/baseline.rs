use super::config::{DataCenterSpec, SimPolicy};
use super::engine::{run, SimMetrics};
use super::schedule::ProvisioningSchedule;
use crate::error::{Error, Result};
use crate::trace::TimeSeries;

#[derive(Debug, Clone)]
pub struct StaticBaseline {
    pub vm_count: u32,
    pub metrics: SimMetrics,
}

/// Smallest fixed VM count that serves `workload` with no rejections.
pub fn static_baseline(workload: &TimeSeries, dc: &DataCenterSpec, policy: &SimPolicy) -> Result<StaticBaseline> {
    let cap = dc.vm_capacity();
    let at = |n: u32| run(workload, &ProvisioningSchedule::constant(workload.start_epoch, n), dc, policy);

    let zero = at(0)?;
    if zero.rejected_requests == 0 {
        return Ok(StaticBaseline { vm_count: 0, metrics: zero });
    }
    let mut lo = 0u32; // rejects
    let mut hi = 1u32;
    let mut hi_metrics = loop {
        let m = at(hi)?;
        if m.rejected_requests == 0 {
            break m;
        }
        if hi == cap {
            let peak = m.utilization.iter().map(|s| s.rejected).max().unwrap_or(0);
            return Err(Error::Capacity(format!(
                "{cap} VMs still reject {} requests (worst interval {peak})",
                m.rejected_requests
            )));
        }
        lo = hi;
        hi = (hi * 2).min(cap);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let m = at(mid)?;
        if m.rejected_requests == 0 {
            hi = mid;
            hi_metrics = m;
        } else {
            lo = mid;
        }
    }
    // Rejections need not be monotone in the VM count; settle on a local minimum.
    while hi > 1 {
        let m = at(hi - 1)?;
        if m.rejected_requests != 0 {
            break;
        }
        hi -= 1;
        hi_metrics = m;
    }
    Ok(StaticBaseline { vm_count: hi, metrics: hi_metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{synth_diurnal, SynthParams};

    #[test]
    fn idle_needs_nothing() {
        let w = TimeSeries::new(0, 5, vec![0.0; 10]).unwrap();
        let b = static_baseline(&w, &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!(b.vm_count, 0);
        assert_eq!(b.metrics.vm_hours, 0.0);
    }

    #[test]
    fn diurnal_peak_of_150_needs_15() {
        let p = SynthParams::new(1, 100.0, 50.0, 0.0, 1).with_interval(5);
        let w = synth_diurnal(&p).unwrap();
        let b = static_baseline(&w, &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!(b.vm_count, 15);
        assert_eq!(b.metrics.rejected_requests, 0);
        let fewer = run(&w, &ProvisioningSchedule::constant(0, 14), &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert!(fewer.rejected_requests > 0);
    }

    #[test]
    fn beyond_capacity_is_an_error() {
        let dc = DataCenterSpec { host_count: 1, ..DataCenterSpec::default() };
        let w = TimeSeries::new(0, 5, vec![1000.0; 4]).unwrap();
        assert!(matches!(static_baseline(&w, &dc, &SimPolicy::default()), Err(Error::Capacity(_))));
    }
}
