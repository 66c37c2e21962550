//! JSON report types shared by the machine-readable subcommands.

use serde::Serialize;
use std::collections::BTreeMap;

/// Echo of the resolved experiment configuration.
#[derive(Serialize, Clone)]
pub struct ConfigEcho {
    pub dist: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub objective: String,
    pub trials: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub grid: usize,
}

/// Point estimate with its Monte Carlo standard error.
#[derive(Serialize, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Competitive ratio together with the benchmark it is measured against.
#[derive(Serialize, Clone, Copy)]
pub struct RatioReport {
    pub value: f64,
    pub benchmark: f64,
    pub guarantee: f64,
    pub pass: bool,
}

/// Dynamic programming solution summary.
#[derive(Serialize, Clone, Copy)]
pub struct DpReport {
    pub value: f64,
    pub grid_error: f64,
    pub balanced_value: f64,
}

/// Top-level report; optional sections are omitted when absent.
#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reserve: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered_thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round_trip_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<BTreeMap<String, Estimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<RatioReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpReport>,
}

impl RunReport {
    pub fn new(command: &str, config: ConfigEcho) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            reserve: None,
            thresholds: None,
            prices: None,
            recovered_thresholds: None,
            round_trip_error: None,
            estimates: None,
            ratio: None,
            dp: None,
        }
    }

    /// Renders the report as pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }
}
