//! Data-center replay: provisioning schedules, request admission and cost accounting.

mod baseline;
mod compare;
mod config;
mod engine;
mod schedule;

pub use baseline::{static_baseline, StaticBaseline};
pub use compare::{compare_models, ComparisonRow, ComparisonTable, ModelRun};
pub use config::{DataCenterSpec, SimPolicy};
pub use engine::{run, IntervalStats, SimMetrics};
pub use schedule::{schedule_from_plans, ProvisioningSchedule, ScheduleEntry};
