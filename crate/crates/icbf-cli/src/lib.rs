//! Scenario runner for the safety-filter library: config parsing,
//! trajectory CSV emission, and the simulation driver behind the
//! command-line binary.

pub mod config;
pub mod csv;
pub mod runner;
