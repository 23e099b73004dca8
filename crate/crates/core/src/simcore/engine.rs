//! Single-threaded replay of a request workload against a provisioning schedule.
//!
//! Time is kept in integer microseconds from the workload start so admission
//! decisions are exact. At any instant, boot completions are applied first,
//! then schedule changes, then arrivals.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{DataCenterSpec, SimPolicy};
use super::schedule::ProvisioningSchedule;
use crate::error::{Error, Result};
use crate::trace::TimeSeries;

const MICROS: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub epoch: i64,
    /// VMs accepting work at the start of the interval.
    pub active_vms: u32,
    pub offered: u64,
    pub served: u64,
    pub rejected: u64,
    /// Busy share of the active VMs' capacity.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub vm_hours: f64,
    pub offered_requests: u64,
    pub served_requests: u64,
    pub rejected_requests: u64,
    /// Filled in by [`super::compare_models`]; zero straight out of a run.
    pub normalized_vm_hours: f64,
    pub normalized_rejections: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub utilization: Vec<IntervalStats>,
}

impl SimMetrics {
    pub fn write_utilization_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,active_vms,offered,served,rejected,utilization")?;
        for s in &self.utilization {
            writeln!(out, "{},{},{},{},{},{:.6}", s.epoch, s.active_vms, s.offered, s.served, s.rejected, s.utilization)?;
        }
        Ok(())
    }
}

/// Kept in boot order, so the last one is always the newest.
struct Vm {
    booted_at: i64,
    /// Completion times of admitted requests not yet finished, FIFO.
    queue: VecDeque<i64>,
}

impl Vm {
    fn settle(&mut self, now: i64) {
        while self.queue.front().is_some_and(|c| *c <= now) {
            self.queue.pop_front();
        }
    }
}

struct Cluster {
    boot_us: i64,
    service_us: i64,
    budget: usize,
    active: Vec<Vm>,
    /// Ready times, non-decreasing.
    pending: VecDeque<i64>,
    target: u32,
    vm_us: i64,
    entries: Vec<(i64, u32)>,
    next_entry: usize,
}

impl Cluster {
    fn new(schedule: &ProvisioningSchedule, origin: i64, policy: &SimPolicy) -> Self {
        let mut initial = 0;
        let mut entries = Vec::new();
        for e in &schedule.entries {
            let t = (e.time - origin) * MICROS;
            if t <= 0 {
                initial = e.target;
            } else {
                entries.push((t, e.target));
            }
        }
        let mut cluster = Cluster {
            boot_us: i64::from(policy.vm_boot_delay) * MICROS,
            service_us: policy.service_us(),
            budget: policy.queue_budget().max(0) as usize,
            active: Vec::new(),
            pending: VecDeque::new(),
            target: initial,
            vm_us: 0,
            entries,
            next_entry: 0,
        };
        for _ in 0..initial {
            cluster.active.push(Vm { booted_at: 0, queue: VecDeque::new() });
        }
        cluster
    }

    /// Applies every boot completion and schedule change at or before `now`.
    fn advance_to(&mut self, now: i64) {
        loop {
            let boot = self.pending.front().copied().filter(|t| *t <= now);
            let change = self.entries.get(self.next_entry).map(|e| e.0).filter(|t| *t <= now);
            match (boot, change) {
                (Some(b), Some(c)) if b <= c => self.finish_boot(),
                (Some(_), None) => self.finish_boot(),
                (_, Some(_)) => {
                    let (t, target) = self.entries[self.next_entry];
                    self.next_entry += 1;
                    self.retarget(t, target);
                }
                (None, None) => break,
            }
        }
    }

    fn finish_boot(&mut self) {
        let ready = self.pending.pop_front().expect("checked");
        self.active.push(Vm { booted_at: ready, queue: VecDeque::new() });
    }

    fn retarget(&mut self, t: i64, target: u32) {
        if target > self.target {
            for _ in self.target..target {
                self.pending.push_back(t + self.boot_us);
            }
        } else {
            let mut excess = self.target - target;
            while excess > 0 && self.pending.pop_back().is_some() {
                excess -= 1;
            }
            for _ in 0..excess {
                let vm = self.active.pop().expect("active count tracks the target");
                let drained = vm.queue.back().copied().unwrap_or(t).max(t);
                self.vm_us += drained - vm.booted_at;
            }
        }
        self.target = target;
    }

    /// Shortest-queue dispatch; `true` when admitted.
    fn offer(&mut self, now: i64) -> bool {
        let mut best: Option<(usize, usize)> = None;
        for (i, vm) in self.active.iter_mut().enumerate() {
            vm.settle(now);
            let len = vm.queue.len();
            if best.is_none_or(|(_, l)| len < l) {
                best = Some((i, len));
            }
        }
        let Some((i, len)) = best else { return false };
        if len > self.budget {
            return false;
        }
        let vm = &mut self.active[i];
        let start = vm.queue.back().copied().unwrap_or(now).max(now);
        vm.queue.push_back(start + self.service_us);
        true
    }

    fn close(&mut self, end: i64) -> i64 {
        let tail: i64 = self.active.iter().map(|vm| end - vm.booted_at).sum();
        self.vm_us + tail
    }
}

/// Replays `workload` (requests per interval, spaced uniformly inside each
/// interval) against `schedule`.
pub fn run(
    workload: &TimeSeries,
    schedule: &ProvisioningSchedule,
    dc: &DataCenterSpec,
    policy: &SimPolicy,
) -> Result<SimMetrics> {
    dc.validate()?;
    policy.validate()?;
    if policy.provisioning_period % workload.interval != 0 {
        return Err(Error::invalid(format!(
            "workload interval {}s does not divide the provisioning period {}s",
            workload.interval, policy.provisioning_period
        )));
    }
    let cap = dc.vm_capacity();
    if let Some(e) = schedule.entries.iter().find(|e| e.target > cap) {
        return Err(Error::Capacity(format!("schedule asks for {} VMs at {}; the data center holds {cap}", e.target, e.time)));
    }
    ProvisioningSchedule::new(schedule.entries.clone())?;

    let origin = workload.start_epoch;
    let interval_us = i64::from(workload.interval) * MICROS;
    let mut cluster = Cluster::new(schedule, origin, policy);
    let mut utilization = Vec::with_capacity(workload.len());
    let (mut offered_total, mut served_total) = (0u64, 0u64);

    for (i, value) in workload.values.iter().enumerate() {
        let begin = i as i64 * interval_us;
        cluster.advance_to(begin);
        let active_vms = cluster.active.len() as u32;
        let n = value.round() as i64;
        let mut served = 0u64;
        for k in 0..n {
            let t = begin + k * interval_us / n;
            cluster.advance_to(t);
            if cluster.offer(t) {
                served += 1;
            }
        }
        let offered = n as u64;
        offered_total += offered;
        served_total += served;
        let busy = served as f64 * policy.service_time;
        let capacity = f64::from(active_vms) * f64::from(workload.interval);
        utilization.push(IntervalStats {
            epoch: workload.epoch_at(i),
            active_vms,
            offered,
            served,
            rejected: offered - served,
            utilization: if capacity > 0.0 { busy / capacity } else { 0.0 },
        });
    }
    let end = workload.len() as i64 * interval_us;
    cluster.advance_to(end - 1);
    let vm_us = cluster.close(end);

    Ok(SimMetrics {
        vm_hours: vm_us as f64 / (3600.0 * MICROS as f64),
        offered_requests: offered_total,
        served_requests: served_total,
        rejected_requests: offered_total - served_total,
        normalized_vm_hours: 0.0,
        normalized_rejections: 0.0,
        utilization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::ScheduleEntry;

    fn series(values: Vec<f64>, interval: u32) -> TimeSeries {
        TimeSeries::new(0, interval, values).unwrap()
    }

    #[test]
    fn idle_hour_costs_ten_vm_hours() {
        let w = series(vec![0.0; 720], 5);
        let m = run(&w, &ProvisioningSchedule::constant(0, 10), &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert!((m.vm_hours - 10.0).abs() < 1e-12);
        assert_eq!(m.rejected_requests, 0);
    }

    #[test]
    fn exactly_at_capacity_never_rejects() {
        let w = series(vec![50.0; 60], 5);
        let m = run(&w, &ProvisioningSchedule::constant(0, 1), &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!((m.served_requests, m.rejected_requests), (3000, 0));
    }

    #[test]
    fn overload_rejects_and_conserves() {
        let w = series(vec![75.0; 12], 5);
        let m = run(&w, &ProvisioningSchedule::constant(0, 1), &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!(m.served_requests + m.rejected_requests, m.offered_requests);
        assert!(m.rejected_requests > 0);
        // One VM serves at most 10 req/s plus the queue it can hold at the end.
        assert!(m.served_requests <= 600 + 5);
    }

    #[test]
    fn no_vms_rejects_everything() {
        let w = series(vec![3.0; 4], 5);
        let m = run(&w, &ProvisioningSchedule { entries: vec![] }, &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!(m.rejected_requests, 12);
        assert_eq!(m.vm_hours, 0.0);
    }

    #[test]
    fn scale_up_waits_for_boot() {
        let w = series(vec![0.0; 120], 5);
        let s = ProvisioningSchedule::new(vec![ScheduleEntry { time: 0, target: 1 }, ScheduleEntry { time: 60, target: 3 }]).unwrap();
        let m = run(&w, &s, &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        assert_eq!(m.utilization[35].active_vms, 1);
        assert_eq!(m.utilization[36].active_vms, 3);
        // 1 VM for 600 s plus 2 VMs from 180 s to 600 s.
        assert!((m.vm_hours - (600.0 + 2.0 * 420.0) / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn scale_down_cancels_pending_first() {
        let w = series(vec![0.0; 120], 5);
        let s = ProvisioningSchedule::new(vec![
            ScheduleEntry { time: 0, target: 2 },
            ScheduleEntry { time: 60, target: 4 },
            ScheduleEntry { time: 100, target: 1 },
        ])
        .unwrap();
        let m = run(&w, &s, &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        // Both pending boots are cancelled, one live VM is retired at 100 s.
        assert!((m.vm_hours - (600.0 + 100.0) / 3600.0).abs() < 1e-12);
        assert_eq!(m.utilization.last().unwrap().active_vms, 1);
    }

    #[test]
    fn over_capacity_schedule_fails_early() {
        let w = series(vec![0.0; 2], 5);
        let r = run(&w, &ProvisioningSchedule::constant(0, 4001), &DataCenterSpec::default(), &SimPolicy::default());
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn interval_must_divide_period() {
        let w = series(vec![0.0; 2], 7);
        assert!(run(&w, &ProvisioningSchedule::constant(0, 1), &DataCenterSpec::default(), &SimPolicy::default()).is_err());
    }

    #[test]
    fn utilization_csv_header() {
        let w = series(vec![10.0; 2], 5);
        let m = run(&w, &ProvisioningSchedule::constant(0, 1), &DataCenterSpec::default(), &SimPolicy::default()).unwrap();
        let mut buf = Vec::new();
        m.write_utilization_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,active_vms,offered,served,rejected,utilization\n0,1,10,10,0,0.200000\n"));
    }
}
