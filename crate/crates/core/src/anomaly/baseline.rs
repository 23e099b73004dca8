use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TimeSeries;

pub const PROFILE_SCHEMA: u32 = 1;
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub slot_seconds: u32,
    /// Threshold (in standard deviations) used to catalogue historical excursions.
    pub excursion_k: f64,
    /// Excursions shorter than this are counted as transient.
    pub cycle_seconds: u32,
    /// Minimum standard deviation as a fraction of the global mean rate.
    pub floor_std_factor: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { slot_seconds: 300, excursion_k: 2.0, cycle_seconds: 300, floor_std_factor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub mean: f64,
    pub std: f64,
    pub count: u64,
    /// No sample fell in this cell; statistics were borrowed.
    pub filled: bool,
    pub excursions: u64,
    pub short_excursions: u64,
}

impl BaselineCell {
    /// Fraction of past excursions from this cell that ended within one cycle.
    pub fn transiency(&self) -> f64 {
        if self.excursions == 0 {
            1.0
        } else {
            self.short_excursions as f64 / self.excursions as f64
        }
    }
}

/// Expected request rate (requests per second) for every (weekday, slot) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub slot_seconds: u32,
    pub cycle_seconds: u32,
    pub floor_std: f64,
    pub global_mean: f64,
    pub global_std: f64,
    /// Indexed by `day_of_week * slots_per_day + slot`.
    pub cells: Vec<BaselineCell>,
}

#[derive(Serialize, Deserialize)]
struct ProfileDocument {
    schema: u32,
    #[serde(flatten)]
    profile: BaselineProfile,
}

/// Monday = 0.
pub fn day_of_week(epoch: i64) -> usize {
    // 1970-01-01 was a Thursday.
    (epoch.div_euclid(SECONDS_PER_DAY) + 3).rem_euclid(7) as usize
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }
}

pub fn build_baseline(history: &TimeSeries, slot_seconds: u32) -> Result<BaselineProfile> {
    build_baseline_with(history, &BaselineOptions { slot_seconds, ..BaselineOptions::default() })
}

/// Per-(weekday, slot) mean and population standard deviation of the rate.
///
/// Cells with no samples take the pooled statistics of the same slot on the
/// observed weekdays, or the global statistics when the slot was never seen,
/// and are flagged as filled.
pub fn build_baseline_with(history: &TimeSeries, opts: &BaselineOptions) -> Result<BaselineProfile> {
    let slot = opts.slot_seconds;
    if slot == 0 || SECONDS_PER_DAY % i64::from(slot) != 0 {
        return Err(Error::invalid(format!("slot of {slot}s does not divide a day")));
    }
    if history.duration_seconds() < i64::from(slot) {
        return Err(Error::insufficient("history is shorter than one baseline slot"));
    }
    let slots_per_day = (SECONDS_PER_DAY / i64::from(slot)) as usize;
    let mut stats = vec![Welford::default(); 7 * slots_per_day];
    let mut global = Welford::default();
    for (i, rate) in history.rates().enumerate() {
        stats[cell_index(history.epoch_at(i), slot, slots_per_day)].push(rate);
        global.push(rate);
    }

    let mut cells = vec![BaselineCell::default(); stats.len()];
    for s in 0..slots_per_day {
        let mut pooled = Welford::default();
        for dow in 0..7 {
            pooled.merge(&stats[dow * slots_per_day + s]);
        }
        let fallback = if pooled.n > 0 { pooled } else { global };
        for dow in 0..7 {
            let w = &stats[dow * slots_per_day + s];
            let (src, filled) = if w.n > 0 { (w, false) } else { (&fallback, true) };
            cells[dow * slots_per_day + s] =
                BaselineCell { mean: src.mean, std: src.std(), count: w.n, filled, ..BaselineCell::default() };
        }
    }

    let mut profile = BaselineProfile {
        slot_seconds: slot,
        cycle_seconds: opts.cycle_seconds,
        floor_std: opts.floor_std_factor * global.mean.abs(),
        global_mean: global.mean,
        global_std: global.std(),
        cells,
    };
    catalogue_excursions(&mut profile, history, opts.excursion_k);
    Ok(profile)
}

fn cell_index(epoch: i64, slot: u32, slots_per_day: usize) -> usize {
    let second_of_day = epoch.rem_euclid(SECONDS_PER_DAY);
    day_of_week(epoch) * slots_per_day + (second_of_day / i64::from(slot)) as usize
}

/// Records every run of same-direction deviations beyond `k` standard
/// deviations against the cell where it started.
fn catalogue_excursions(profile: &mut BaselineProfile, history: &TimeSeries, k: f64) {
    let interval = i64::from(history.interval);
    let cycle = i64::from(profile.cycle_seconds);
    let mut open: Option<(usize, i8, i64)> = None; // (start cell, direction, samples)
    let close = |profile: &mut BaselineProfile, run: (usize, i8, i64)| {
        let cell = &mut profile.cells[run.0];
        cell.excursions += 1;
        if run.2 * interval < cycle {
            cell.short_excursions += 1;
        }
    };
    for (i, rate) in history.rates().enumerate() {
        let epoch = history.epoch_at(i);
        let idx = profile.index_of(epoch);
        let z = profile.z_score(idx, rate);
        let dir = if z > k {
            1
        } else if z < -k {
            -1
        } else {
            0
        };
        open = match (open, dir) {
            (Some(run), d) if d != 0 && d == run.1 => Some((run.0, run.1, run.2 + 1)),
            (run, d) => {
                if let Some(run) = run {
                    close(profile, run);
                }
                (d != 0).then_some((idx, d, 1))
            }
        };
    }
    if let Some(run) = open {
        close(profile, run);
    }
}

impl BaselineProfile {
    pub fn slots_per_day(&self) -> usize {
        (SECONDS_PER_DAY / i64::from(self.slot_seconds)) as usize
    }

    pub fn index_of(&self, epoch: i64) -> usize {
        cell_index(epoch, self.slot_seconds, self.slots_per_day())
    }

    pub fn cell(&self, epoch: i64) -> &BaselineCell {
        &self.cells[self.index_of(epoch)]
    }

    pub fn cell_at(&self, day_of_week: usize, slot: usize) -> &BaselineCell {
        &self.cells[day_of_week * self.slots_per_day() + slot]
    }

    pub fn expected_rate(&self, epoch: i64) -> f64 {
        self.cell(epoch).mean
    }

    /// Signed deviation in units of `max(cell std, floor_std)`.
    pub fn z_score(&self, index: usize, rate: f64) -> f64 {
        let cell = &self.cells[index];
        let scale = cell.std.max(self.floor_std);
        let diff = rate - cell.mean;
        if scale > 0.0 {
            diff / scale
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProfileDocument { schema: PROFILE_SCHEMA, profile: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDocument = serde_json::from_str(text)?;
        if doc.schema != PROFILE_SCHEMA {
            return Err(Error::Format(format!("unsupported profile schema {}", doc.schema)));
        }
        let p = doc.profile;
        if p.slot_seconds == 0
            || SECONDS_PER_DAY % i64::from(p.slot_seconds) != 0
            || p.cells.len() != 7 * p.slots_per_day()
        {
            return Err(Error::Format("profile cell layout is inconsistent".into()));
        }
        Ok(p)
    }
}
