//! Command-line front end: configuration, verification suites and run drivers.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod json;
