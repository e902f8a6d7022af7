//! File formats, command line and HTTP service around `fuzzytherm-core`.
//!
//! - [`config`]: JSON documents for variables, controllers and run configs
//! - [`trace`]: CSV/JSON export of frames and run records
//! - [`service`]: the HTTP API and telemetry stream for a live loop
//! - [`cli`]: the `fuzzytherm` command

pub mod cli;
pub mod config;
pub mod service;
pub mod trace;
