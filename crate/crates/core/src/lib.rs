//! Predictive autoscaling workbench.
//!
//! The crate is organised around the control loop of an elastic web service:
//!
//! * [`trace`] turns raw page-view dumps (or a synthetic generator) into a
//!   uniformly sampled request series.
//! * [`tsmodel`] fits ARIMA models by conditional least squares and produces
//!   multi-step forecasts.
//! * [`anomaly`] learns calendar baselines, raises divergence alarms and
//!   predicts anomalies with a discretised Markov chain.
//! * [`planner`] turns forecast rates into VM counts under a response-time
//!   target and maps them onto concrete provider offers.
//! * [`simcore`] replays a workload against a provisioning schedule in a
//!   deterministic data-center simulator.

pub mod anomaly;
pub mod error;
pub mod planner;
pub mod seed;
pub mod simcore;
pub mod trace;
pub mod tsmodel;

pub use error::{Error, Result};
pub use trace::{HourlyCount, TimeSeries};
pub use tsmodel::{ArimaModel, ArimaOrder, FitReport};
