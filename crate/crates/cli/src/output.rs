//! Rendering of run results with the embedded config and provenance.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::commands::Outcome;
use crate::config::{ExperimentConfig, Format, SCHEMA_VERSION};
use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the compact JSON serialization of the effective config
    /// with the `output` block reset, so the hash names the experiment and
    /// not where its results were written.
    pub config_sha256: String,
    pub seed: u64,
    pub schema_version: u32,
    pub bridgekernel_version: &'static str,
    pub cli_version: &'static str,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        let mut experiment = config.clone();
        experiment.output = Default::default();
        let canonical = serde_json::to_string(&experiment).map_err(|e| RunError::Abort(e.to_string()))?;
        Ok(Self {
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed: config.seed,
            schema_version: SCHEMA_VERSION,
            bridgekernel_version: bridgekernel::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
        })
    }
}

/// The output document: JSON with `config`, `provenance`, `pass` and
/// `result`, or CSV with the same metadata as `#` comment lines followed by
/// the command's table (or `key,value` rows of the flattened result).
pub fn render(config: &ExperimentConfig, outcome: &Outcome, format: Format) -> Result<String, RunError> {
    let provenance = Provenance::new(config)?;
    let config_value = serde_json::to_value(config).map_err(|e| RunError::Abort(e.to_string()))?;
    match format {
        Format::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": config.command.name(),
                "pass": outcome.pass,
                "provenance": provenance,
                "config": config_value,
                "result": outcome.result,
            });
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| RunError::Abort(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut text = String::new();
            let meta = |v: &Value| serde_json::to_string(v).unwrap_or_default();
            text.push_str(&format!("# schema_version: {SCHEMA_VERSION}\n"));
            text.push_str(&format!("# command: {}\n", config.command.name()));
            text.push_str(&format!("# pass: {}\n", meta(&json!(outcome.pass))));
            text.push_str(&format!("# provenance: {}\n", meta(&json!(provenance))));
            text.push_str(&format!("# config: {}\n", meta(&config_value)));
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| RunError::Abort(e.to_string());
            match &outcome.table {
                Some(table) => {
                    w.write_record(&table.columns).map_err(csv_err)?;
                    for row in &table.rows {
                        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
                    }
                }
                None => {
                    w.write_record(["key", "value"]).map_err(csv_err)?;
                    let mut rows = Vec::new();
                    flatten("", &outcome.result, &mut rows);
                    for (k, v) in rows {
                        w.write_record([k, v]).map_err(csv_err)?;
                    }
                }
            }
            let body = w.into_inner().map_err(|e| RunError::Abort(e.to_string()))?;
            text.push_str(&String::from_utf8_lossy(&body));
            Ok(text)
        }
    }
}

/// Leaves of a JSON tree as `(dotted.path, value)`.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
