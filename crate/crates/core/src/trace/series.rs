use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_INTERVAL: u32 = 5;

/// Uniformly sampled request counts. `values[i]` is the number of requests
/// arriving during `[epoch_at(i), epoch_at(i) + interval)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start_epoch: i64,
    pub interval: u32,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start_epoch: i64, interval: u32, values: Vec<f64>) -> Result<Self> {
        if interval == 0 {
            return Err(Error::invalid("series interval must be positive"));
        }
        if values.is_empty() {
            return Err(Error::invalid("series must hold at least one sample"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("series value {v} is negative or not finite")));
        }
        Ok(Self { start_epoch, interval, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn epoch_at(&self, index: usize) -> i64 {
        self.start_epoch + index as i64 * i64::from(self.interval)
    }

    /// First epoch after the last sample.
    pub fn end_epoch(&self) -> i64 {
        self.epoch_at(self.values.len())
    }

    pub fn duration_seconds(&self) -> i64 {
        self.values.len() as i64 * i64::from(self.interval)
    }

    /// Requests per second during sample `index`.
    pub fn rate_at(&self, index: usize) -> f64 {
        self.values[index] / f64::from(self.interval)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        let interval = f64::from(self.interval);
        self.values.iter().map(move |v| v / interval)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.values.len() {
            return Err(Error::invalid(format!(
                "slice {}..{} out of bounds for series of {}",
                range.start,
                range.end,
                self.values.len()
            )));
        }
        Ok(Self {
            start_epoch: self.epoch_at(range.start),
            interval: self.interval,
            values: self.values[range].to_vec(),
        })
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(&self, next: &TimeSeries) -> Result<Self> {
        if next.interval != self.interval || next.start_epoch != self.end_epoch() {
            return Err(Error::invalid("series are not contiguous"));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        Ok(Self { start_epoch: self.start_epoch, interval: self.interval, values })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["epoch", "interval_s", "value"])?;
        let interval = self.interval.to_string();
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([self.epoch_at(i).to_string(), interval.clone(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["epoch", "interval_s", "value"] {
            return Err(Error::Format(format!("unexpected series header {headers:?}")));
        }
        let mut start = None;
        let mut interval = None;
        let mut values = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let epoch: i64 = field(0).parse().map_err(|_| bad_row(row, "epoch"))?;
            let step: u32 = field(1).parse().map_err(|_| bad_row(row, "interval_s"))?;
            let value: f64 = field(2).parse().map_err(|_| bad_row(row, "value"))?;
            let s = *start.get_or_insert(epoch);
            let i = *interval.get_or_insert(step);
            if step != i || epoch != s + row as i64 * i64::from(i) {
                return Err(Error::Format(format!("row {row} breaks uniform sampling")));
            }
            values.push(value);
        }
        let (Some(start), Some(interval)) = (start, interval) else {
            return Err(Error::Format("series file has no samples".into()));
        };
        TimeSeries::new(start, interval, values)
    }
}

fn bad_row(row: usize, field: &str) -> Error {
    Error::Format(format!("row {row}: unparsable {field}"))
}

/// Contiguous prefix/suffix split; the prefix holds `round(len * train_fraction)` samples.
pub fn split_train_test(series: &TimeSeries, train_fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n = series.len();
    let cut = (n as f64 * train_fraction).round() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::insufficient(format!(
            "splitting {n} samples at {train_fraction} leaves one side empty"
        )));
    }
    Ok((series.slice(0..cut)?, series.slice(cut..n)?))
}
