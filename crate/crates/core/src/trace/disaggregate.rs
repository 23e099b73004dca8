use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::pagecounts::HourlyCount;
use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::seed::{indexed_seed, rng_from};

const SECONDS_PER_HOUR: usize = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisaggregationParams {
    /// Shape of the log-normal per-second weights.
    pub sigma: f64,
    pub seed: u64,
    /// Output interval in seconds; must divide 3600.
    pub consolidation: u32,
    /// Epoch of hour index 0.
    #[serde(default)]
    pub origin_epoch: i64,
}

impl Default for DisaggregationParams {
    fn default() -> Self {
        Self { sigma: 1.0, seed: 0, consolidation: 5, origin_epoch: 0 }
    }
}

impl DisaggregationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma {} must be positive", self.sigma)));
        }
        if self.consolidation == 0 || SECONDS_PER_HOUR % self.consolidation as usize != 0 {
            return Err(Error::invalid(format!("consolidation {} must divide 3600", self.consolidation)));
        }
        Ok(())
    }
}

/// Spreads hourly totals over seconds with seeded log-normal weights and
/// re-aggregates them into `consolidation`-second samples.
///
/// Per-second counts are integers apportioned by the largest-remainder rule,
/// so every hour (and therefore the whole series) conserves its total exactly.
/// Each hour draws from its own stream keyed by `(seed, hour_index)`.
pub fn disaggregate(hourly: &[HourlyCount], params: &DisaggregationParams) -> Result<TimeSeries> {
    params.validate()?;
    let first = hourly.first().ok_or_else(|| Error::insufficient("no hourly counts"))?;
    if let Some(w) = hourly.windows(2).find(|w| w[1].hour_index != w[0].hour_index + 1) {
        return Err(Error::invalid(format!("hours {} and {} are not contiguous", w[0].hour_index, w[1].hour_index)));
    }

    let block = params.consolidation as usize;
    let lognormal = LogNormal::new(0.0, params.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(hourly.len() * SECONDS_PER_HOUR / block);
    let mut weights = vec![0.0; SECONDS_PER_HOUR];
    for hour in hourly {
        let seconds = if hour.count == 0 {
            vec![0u64; SECONDS_PER_HOUR]
        } else {
            let mut rng = rng_from(indexed_seed(params.seed, hour.hour_index));
            for w in weights.iter_mut() {
                *w = lognormal.sample(&mut rng);
            }
            apportion(hour.count, &weights)
        };
        values.extend(seconds.chunks(block).map(|c| c.iter().sum::<u64>() as f64));
    }

    let start = params.origin_epoch + first.hour_index as i64 * SECONDS_PER_HOUR as i64;
    TimeSeries::new(start, params.consolidation, values)
}

/// Largest-remainder apportionment of `total` proportional to `weights`.
/// Ties go to the lower index.
pub(crate) fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let scale = total as f64 / sum;
    let mut counts = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let share = w * scale;
        let floor = share.floor();
        counts.push(floor as u64);
        remainders.push((share - floor, i));
    }
    let assigned: u64 = counts.iter().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    if assigned <= total {
        let mut residue = total - assigned;
        for &(_, i) in remainders.iter().cycle() {
            if residue == 0 {
                break;
            }
            counts[i] += 1;
            residue -= 1;
        }
    } else {
        // Rounding pushed the floors over the total: take back from the smallest remainders.
        let mut excess = assigned - total;
        for &(_, i) in remainders.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}
