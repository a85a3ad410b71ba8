//! Command-line driver for `stoqmc-core`: subcommands, JSON reports and the
//! acceptance suite.

pub mod app;
pub mod fit;
pub mod fixtures;
pub mod report;
pub mod suite;
