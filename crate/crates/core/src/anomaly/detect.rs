use serde::{Deserialize, Serialize};

use super::baseline::BaselineProfile;
use crate::error::{Error, Result};
use crate::trace::TimeSeries;

pub const DEFAULT_MIN_RUN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Below,
}

/// One anomalous sample. Field order matches the JSON-lines alarm stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub ts: i64,
    /// Observed rate, requests per second.
    pub observed: f64,
    pub expected: f64,
    /// Signed z-score against the baseline cell.
    pub severity: f64,
    pub transiency: f64,
    pub direction: Direction,
}

/// Run-length state for one stream of observations.
///
/// A sample is anomalous when it deviates from its cell mean by more than
/// `k * max(std, floor_std)`. Once `min_run` consecutive samples deviate in
/// the same direction, every further sample of that run raises an alarm.
#[derive(Debug, Clone)]
pub struct StreamingDetector<'a> {
    profile: &'a BaselineProfile,
    k: f64,
    min_run: usize,
    run: usize,
    direction: Option<Direction>,
}

impl<'a> StreamingDetector<'a> {
    pub fn new(profile: &'a BaselineProfile, k: f64, min_run: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::invalid(format!("detection threshold {k} must be positive")));
        }
        if min_run == 0 {
            return Err(Error::invalid("min_run must be at least 1"));
        }
        Ok(Self { profile, k, min_run, run: 0, direction: None })
    }

    pub fn push(&mut self, ts: i64, rate: f64) -> Option<Alarm> {
        let index = self.profile.index_of(ts);
        let severity = self.profile.z_score(index, rate);
        let direction = if severity > self.k {
            Some(Direction::Above)
        } else if severity < -self.k {
            Some(Direction::Below)
        } else {
            None
        };
        match direction {
            None => {
                self.run = 0;
                self.direction = None;
                None
            }
            Some(d) => {
                self.run = if self.direction == Some(d) { self.run + 1 } else { 1 };
                self.direction = Some(d);
                (self.run >= self.min_run).then(|| {
                    let cell = &self.profile.cells[index];
                    Alarm { ts, observed: rate, expected: cell.mean, severity, transiency: cell.transiency(), direction: d }
                })
            }
        }
    }
}

pub fn detect(observed: &TimeSeries, profile: &BaselineProfile, k: f64, min_run: usize) -> Result<Vec<Alarm>> {
    let mut detector = StreamingDetector::new(profile, k, min_run)?;
    Ok(observed.rates().enumerate().filter_map(|(i, r)| detector.push(observed.epoch_at(i), r)).collect())
}
