use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Parameters of a synthetic day/night workload. Rates are in requests per
/// second; the generated samples are whole request counts per interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub days: u32,
    pub base_rate: f64,
    pub amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub interval: u32,
    #[serde(default)]
    pub start_epoch: i64,
}

fn default_interval() -> u32 {
    1
}

impl SynthParams {
    pub fn new(days: u32, base_rate: f64, amplitude: f64, noise_sigma: f64, seed: u64) -> Self {
        Self { days, base_rate, amplitude, noise_sigma, seed, interval: 1, start_epoch: 0 }
    }

    pub fn with_interval(mut self, interval: u32) -> Self {
        self.interval = interval;
        self
    }

    /// Noise-free rate at `seconds` past midnight: lowest at midnight, highest at noon.
    pub fn mean_rate(&self, seconds_of_day: f64) -> f64 {
        self.base_rate - self.amplitude * (TAU * seconds_of_day / 86_400.0).cos()
    }
}

/// 24-hour sinusoid plus seeded Gaussian noise, clipped at zero.
pub fn synth_diurnal(params: &SynthParams) -> Result<TimeSeries> {
    if !(params.amplitude >= 0.0 && params.base_rate > params.amplitude) {
        return Err(Error::invalid("synthetic workload needs base_rate > amplitude >= 0"));
    }
    if params.days == 0 || params.interval == 0 || 86_400 % params.interval != 0 {
        return Err(Error::invalid("synthetic workload needs days >= 1 and an interval dividing 86400"));
    }
    if !(params.noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from(params.seed);
    let interval = f64::from(params.interval);
    let n = params.days as usize * 86_400 / params.interval as usize;
    let values = (0..n)
        .map(|i| {
            let t = (params.start_epoch + i as i64 * i64::from(params.interval)).rem_euclid(86_400);
            let mut rate = params.mean_rate(t as f64);
            if params.noise_sigma > 0.0 {
                rate += noise.sample(&mut rng);
            }
            (rate.max(0.0) * interval).round()
        })
        .collect();
    TimeSeries::new(params.start_epoch, params.interval, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_without_amplitude_or_noise() {
        let s = synth_diurnal(&SynthParams::new(1, 100.0, 0.0, 0.0, 1)).unwrap();
        assert!(s.values.iter().all(|v| *v == 100.0));
    }

    #[test]
    fn same_seed_same_series() {
        let p = SynthParams::new(2, 100.0, 30.0, 8.0, 99).with_interval(5);
        assert_eq!(synth_diurnal(&p).unwrap(), synth_diurnal(&p).unwrap());
        let q = SynthParams { seed: 100, ..p };
        assert_ne!(synth_diurnal(&p).unwrap(), synth_diurnal(&q).unwrap());
    }

    #[test]
    fn swings_between_trough_and_peak() {
        let s = synth_diurnal(&SynthParams::new(1, 100.0, 50.0, 0.0, 1)).unwrap();
        let min = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, 50.0);
        assert_eq!(max, 150.0);
        assert_eq!(s.values[0], 50.0);
        assert_eq!(s.values[43_200], 150.0);
    }

    #[test]
    fn counts_scale_with_interval() {
        let s = synth_diurnal(&SynthParams::new(1, 100.0, 0.0, 0.0, 1).with_interval(5)).unwrap();
        assert_eq!(s.len(), 17_280);
        assert!(s.rates().all(|r| r == 100.0));
    }

    #[test]
    fn rejects_amplitude_above_base() {
        assert!(synth_diurnal(&SynthParams::new(1, 10.0, 10.0, 0.0, 1)).is_err());
    }
}
