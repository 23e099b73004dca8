//! Anomaly detection against calendar baselines and anomaly prediction with
//! workload-level Markov chains.

mod baseline;
mod detect;
mod markov;

pub use baseline::{
    build_baseline, build_baseline_with, day_of_week, BaselineCell, BaselineOptions, BaselineProfile, PROFILE_SCHEMA,
};
pub use detect::{detect, Alarm, Direction, StreamingDetector, DEFAULT_MIN_RUN};
pub use markov::{fit_markov, perturb_markov, predict_anomaly, AnomalyForecast, MarkovChain, CHAIN_SCHEMA};
