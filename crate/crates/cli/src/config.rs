//! Run configuration: a TOML file with one section per module, patched by
//! `--set section.key=value` overrides before deserialization.

use std::fs;
use std::path::Path;

use equilivest::detection::{BreakpointConfig, FallConfig, StepDetectorConfig};
use equilivest::pipeline::{FeedbackConfig, PipelineConfig};
use equilivest::riskmodel::{TrainParams, WindowParams};
use equilivest::telemetry::DEFAULT_PORT;
use equilivest::{Error, FilterConfig};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetryConfig {
    pub port: u16,
    pub bind: std::net::IpAddr,
    pub queue_capacity: usize,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self { port: DEFAULT_PORT, bind: [0, 0, 0, 0].into(), queue_capacity: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub breakpoint: BreakpointConfig,
    pub steps: StepDetectorConfig,
    pub fall: FallConfig,
    pub windows: WindowParams,
    pub feedback: FeedbackConfig,
    pub train: TrainParams,
    pub telemetry: TelemetryConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, Error> {
        let mut table = match path {
            Some(p) => parse_table(&fs::read_to_string(p)?, "config")?,
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config { field: "config", reason: e.message().to_string() })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            filter: self.filter,
            breakpoint: self.breakpoint,
            steps: self.steps,
            fall: self.fall,
            windows: self.windows,
            feedback: self.feedback,
        }
    }
}

pub fn parse_table(text: &str, what: &'static str) -> Result<Table, Error> {
    text.parse::<Table>().map_err(|e| Error::Config { field: what, reason: e.message().to_string() })
}

/// Applies `a.b.c=value`. The value is read as a TOML literal and falls back
/// to a bare string, so `--set feedback.risk_enabled=true` and
/// `--set steps.peak_threshold=12` both work.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), Error> {
    let bad = |reason: &str| Error::Config { field: "--set", reason: format!("`{assignment}`: {reason}") };
    let (key, raw) = assignment.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let (last, parents) = path.split_last().expect("split yields one segment");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| bad("key path crosses a non-table value"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
