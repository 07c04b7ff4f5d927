//! Scenario files and run output.

pub mod config;
pub mod output;

pub use config::{parse_scenario_file, parse_scenario_str, scenario_to_toml, ConfigError};
pub use output::{
    read_metrics, read_timeseries, write_comparison, write_run, write_timeseries, MetricsFile, OutputError, TimeseriesRow,
    TIMESERIES_COLUMNS,
};
