//! Workload ingestion: dump parsing, hourly-to-second disaggregation and
//! synthetic generators.

mod disaggregate;
mod pagecounts;
mod series;
mod synth;

pub use disaggregate::{disaggregate, DisaggregationParams};
pub use pagecounts::{
    ingest_directory, parse_pagecounts, FileReport, FileStatus, HourlyCount, Ingest, IngestReport, PagecountTally,
};
pub use series::{split_train_test, TimeSeries, DEFAULT_INTERVAL};
pub use synth::{synth_diurnal, SynthParams};
