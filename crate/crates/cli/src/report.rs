//! Report envelope, exit codes, and output writing.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use shadowlab_core::experiments::{Check, Outcome};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration. Exit code 4.
    Config(String),
    /// Anything that fails after the configuration was accepted. Exit code 1.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<shadowlab_core::Error> for CliError {
    fn from(e: shadowlab_core::Error) -> Self {
        match e {
            shadowlab_core::Error::InvalidArgument(_) | shadowlab_core::Error::UnknownChart { .. } | shadowlab_core::Error::Dimension { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn exit_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Passed => 0,
        Outcome::Violation => 2,
        Outcome::BudgetExhausted => 3,
    }
}

/// SHA-256 of the compact JSON form (keys sorted).
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(config).expect("JSON values serialize")))
}

#[derive(Serialize)]
pub struct Envelope<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: String,
    pub config: &'a Value,
    pub outcome: Outcome,
    pub report: &'a Value,
}

pub fn envelope<'a>(command: &'a str, config: &'a Value, outcome: Outcome, report: &'a Value) -> Envelope<'a> {
    Envelope { tool: "shadowlab", version: VERSION, command, config_hash: config_hash(config), config, outcome, report }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Pretty JSON with a trailing newline, to the file or stdout.
pub fn write_json<T: Serialize>(out: Option<&Path>, x: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(x).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    write_text(out, &s)
}

pub fn write_text(out: Option<&Path>, s: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, s)?,
        None => std::io::stdout().lock().write_all(s.as_bytes())?,
    }
    Ok(())
}

pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

pub fn checks_csv(checks: &[Check]) -> CliResult<String> {
    let header: Vec<String> = ["name", "value", "relation", "bound", "passed"].iter().map(|s| s.to_string()).collect();
    let rel = |c: &Check| to_value(&c.relation).as_str().unwrap_or("?").to_string();
    let rows: Vec<Vec<String>> =
        checks.iter().map(|c| vec![c.name.clone(), format!("{:e}", c.value), rel(c), format!("{:e}", c.bound), c.passed.to_string()]).collect();
    csv_text(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use shadowlab_core::experiments::Relation;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"m": 1, "eps": 0.1}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"eps": 0.1, "m": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn checks_table() {
        let s = checks_csv(&[Check::new("sup defect", 1e-3, Relation::Le, 2e-3)]).unwrap();
        assert_eq!(s, "name,value,relation,bound,passed\nsup defect,1e-3,<=,2e-3,true\n");
    }
}
