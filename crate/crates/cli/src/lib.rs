//! Experiment runner and command-line front end for `tandem-core`.

pub mod app;
pub mod config;
pub mod montecarlo;
pub mod report;
pub mod tasks;
