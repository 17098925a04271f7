//! Experiment runner behind the `poince` command.

pub mod config;
pub mod data;
pub mod dump;
pub mod runner;
pub mod summary;
