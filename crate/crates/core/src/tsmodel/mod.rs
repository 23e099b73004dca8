//! Workload prediction: differencing, ARIMA fitting by conditional least
//! squares, forecasting and order selection.

mod arima;
mod difference;
mod order;
pub mod roots;
mod select;
mod trend;

pub use arima::{fit, fit_with, yule_walker, ArimaModel, FitOptions, FitReport, Forecast, MODEL_SCHEMA};
pub use difference::{difference, undifference};
pub use order::{ArimaOrder, DEFAULT_ORDER_CAP};
pub use select::{grid_select, grid_select_with, holdout_mse, GridEntry, GridFailure, GridOutcome};
pub use trend::{linear_trend_baseline, ols_line};
