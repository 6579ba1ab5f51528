//! Experiment driver for option-iteration agents: configuration, runs,
//! sweeps, checkpoints, metrics, plots and offline analyses.

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod grid_svg;
pub mod manifest;
pub mod metrics;
pub mod parallel;
pub mod plot;
pub mod runner;
pub mod selftest;
pub mod sweep;
pub mod trajectory;
