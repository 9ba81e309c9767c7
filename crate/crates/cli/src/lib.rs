//! Library side of the `kinks` command line tool: TOML experiment
//! configurations, scenario pipelines, plot-ready output files and
//! pass/fail reports.

pub mod compare;
pub mod config;
pub mod output;
pub mod report;
pub mod scenarios;
