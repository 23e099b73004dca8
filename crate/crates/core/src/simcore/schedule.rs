use serde::{Deserialize, Serialize};

use super::config::SimPolicy;
use crate::error::{Error, Result};
use crate::planner::ResourceRequirement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// When the change is requested. Scale-ups become usable one boot delay
    /// later; scale-downs apply immediately. Entries at or before the start of
    /// a run describe capacity that is already live.
    pub time: i64,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisioningSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl ProvisioningSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].time >= w[1].time) {
            return Err(Error::invalid("schedule times must be strictly increasing"));
        }
        Ok(Self { entries })
    }

    pub fn constant(start: i64, vms: u32) -> Self {
        Self { entries: vec![ScheduleEntry { time: start, target: vms }] }
    }

    pub fn max_target(&self) -> u32 {
        self.entries.iter().map(|e| e.target).max().unwrap_or(0)
    }
}

/// Turns contiguous per-window requirements into timed target changes.
///
/// Scale-ups are requested one boot delay before their window (never before
/// the previous window starts) so capacity is live on time; scale-downs take
/// effect at the window boundary.
pub fn schedule_from_plans(plans: &[ResourceRequirement], policy: &SimPolicy) -> Result<ProvisioningSchedule> {
    policy.validate()?;
    let Some(first) = plans.first() else {
        return Ok(ProvisioningSchedule { entries: Vec::new() });
    };
    for w in plans.windows(2) {
        if w[1].valid_from < w[0].valid_until {
            return Err(Error::invalid(format!("windows starting at {} and {} overlap", w[0].valid_from, w[1].valid_from)));
        }
        if w[1].valid_from > w[0].valid_until {
            return Err(Error::invalid(format!("gap between {} and {}", w[0].valid_until, w[1].valid_from)));
        }
    }
    if plans.iter().any(|p| p.valid_from >= p.valid_until) {
        return Err(Error::invalid("every window must have positive length"));
    }

    let boot = i64::from(policy.vm_boot_delay);
    let mut entries = vec![ScheduleEntry { time: first.valid_from, target: first.vm_count }];
    for w in plans.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if next.vm_count == prev.vm_count {
            continue;
        }
        let time = if next.vm_count > prev.vm_count { (next.valid_from - boot).max(prev.valid_from) } else { next.valid_from };
        let last = entries.last_mut().expect("non-empty");
        if time <= last.time {
            // Only reachable when the boot delay equals the period: keep the larger target.
            last.target = last.target.max(next.vm_count);
        } else {
            entries.push(ScheduleEntry { time, target: next.vm_count });
        }
    }
    ProvisioningSchedule::new(entries)
}
