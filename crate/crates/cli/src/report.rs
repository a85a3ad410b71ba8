//! The JSON envelope every subcommand writes.

use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "stoqmc";

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub wall_time_s: f64,
    pub threads: usize,
}

/// `config` echoes every resolved parameter, including the seed, so a report
/// is enough to reproduce its run.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub result: Value,
    pub meta: Meta,
}

impl Report {
    pub fn new(command: &str, config: Value, result: Value, wall_time_s: f64) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            result,
            meta: Meta {
                wall_time_s,
                threads: rayon::current_num_threads(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are plain JSON")
    }
}
