//! Named experiments driven by a JSON parameter object.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use shadowlab_core::experiments::{
    alpha_check, case_b1, expansion_table, four_balls, matcher_oracle, orbit_drift, polar_rates, ps_delta, rest_drift, saddle_noise, three_balls,
    xstar_verify, AlphaConfig, BallsConfig, CaseB1Config, Check, Checked, OracleConfig, OrbitDriftConfig, Outcome, PolarConfig, PsDeltaConfig,
    RestDriftConfig, SaddleConfig, XStarVerifyConfig,
};

use crate::report::{to_value, CliError, CliResult};

pub const NAMES: &[&str] = &[
    "lemma1-rest",
    "lemma1-orbit",
    "case-b1",
    "ps-delta",
    "four-balls",
    "three-balls",
    "lemma3-table",
    "saddle-noise",
    "matcher-oracle",
    "alpha-check",
    "polar-rates",
    "xstar-verify",
];

/// Contents of an experiment config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    /// JSON report path; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// CSV table of the checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> CliResult<Self> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        if !NAMES.contains(&c.experiment.as_str()) {
            return Err(CliError::Config(format!("unknown experiment {:?}; known: {}", c.experiment, NAMES.join(", "))));
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// The expansion table takes no parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

pub struct Finished {
    /// Fully resolved configuration, defaults included.
    pub config: Value,
    pub report: Value,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
}

/// Every key not present in the defaults, so that all of them are reported at once.
fn unknown_keys<C: Default + Serialize>(params: &Map<String, Value>) -> Vec<String> {
    let known = to_value(&C::default());
    let known = known.as_object().cloned().unwrap_or_default();
    params.keys().filter(|k| !known.contains_key(*k)).cloned().collect()
}

/// With `dry` set only the configuration is resolved.
fn run<C, R, F>(params: &Map<String, Value>, dry: bool, f: F) -> CliResult<Finished>
where
    C: DeserializeOwned + Serialize + Default,
    R: Serialize + Checked,
    F: FnOnce(&C) -> shadowlab_core::Result<R>,
{
    let unknown = unknown_keys::<C>(params);
    if !unknown.is_empty() {
        return Err(CliError::Config(format!("unknown parameters: {}", unknown.join(", "))));
    }
    let cfg: C = serde_json::from_value(Value::Object(params.clone())).map_err(|e| CliError::Config(e.to_string()))?;
    if dry {
        return Ok(Finished { config: to_value(&cfg), report: Value::Null, outcome: Outcome::Passed, checks: vec![] });
    }
    let report = f(&cfg)?;
    Ok(Finished { config: to_value(&cfg), outcome: report.outcome(), checks: report.checks().to_vec(), report: to_value(&report) })
}

pub fn run_named(name: &str, params: &Map<String, Value>, dry: bool) -> CliResult<Finished> {
    match name {
        "lemma1-rest" => run::<RestDriftConfig, _, _>(params, dry, rest_drift),
        "lemma1-orbit" => run::<OrbitDriftConfig, _, _>(params, dry, orbit_drift),
        "case-b1" => run::<CaseB1Config, _, _>(params, dry, case_b1),
        "ps-delta" => run::<PsDeltaConfig, _, _>(params, dry, ps_delta),
        "four-balls" => run::<BallsConfig, _, _>(params, dry, four_balls),
        "three-balls" => run::<BallsConfig, _, _>(params, dry, three_balls),
        "lemma3-table" => run::<NoParams, _, _>(params, dry, |_| expansion_table()),
        "saddle-noise" => run::<SaddleConfig, _, _>(params, dry, saddle_noise),
        "matcher-oracle" => run::<OracleConfig, _, _>(params, dry, matcher_oracle),
        "alpha-check" => run::<AlphaConfig, _, _>(params, dry, alpha_check),
        "polar-rates" => run::<PolarConfig, _, _>(params, dry, polar_rates),
        "xstar-verify" => run::<XStarVerifyConfig, _, _>(params, dry, xstar_verify),
        other => Err(CliError::Config(format!("unknown experiment {other:?}; known: {}", NAMES.join(", ")))),
    }
}

/// Parses `key=value`; the value is JSON, or a bare string if it does not parse.
pub fn parse_set(s: &str) -> CliResult<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got {s:?}")))?;
    let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_roundtrips_byte_identically() {
        let src = r#"{"experiment": "lemma1-rest", "params": {"m": 1000, "eps": 0.1}, "output": "out.json"}"#;
        let c = ExperimentConfig::from_json(src).unwrap();
        let once = c.to_json();
        let twice = ExperimentConfig::from_json(&once).unwrap().to_json();
        assert_eq!(once, twice);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "case-b1", "extra": 1}"#).is_err());
    }

    #[test]
    fn all_unknown_parameters_are_listed() {
        let mut p = Map::new();
        p.insert("epsilon".into(), Value::from(0.1));
        p.insert("mm".into(), Value::from(3));
        p.insert("m".into(), Value::from(100.0));
        let Err(CliError::Config(msg)) = run_named("lemma1-rest", &p, false) else { panic!("expected a config error") };
        assert!(msg.contains("epsilon") && msg.contains("mm") && !msg.contains(" m,"), "{msg}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut p = Map::new();
        p.insert("eps".into(), Value::from(-1.0));
        p.insert("m".into(), Value::from(0.0));
        let Err(CliError::Config(msg)) = run_named("lemma1-rest", &p, false) else { panic!("expected a config error") };
        assert!(msg.contains("eps") && msg.contains("m:"), "{msg}");
    }

    #[test]
    fn expansion_table_runs_and_rejects_parameters() {
        let f = run_named("lemma3-table", &Map::new(), false).unwrap();
        assert_eq!(f.outcome, Outcome::Passed);
        let mut p = Map::new();
        p.insert("c".into(), Value::from(1));
        assert!(run_named("lemma3-table", &p, false).is_err());
    }

    #[test]
    fn set_values() {
        assert_eq!(parse_set("m=1000").unwrap(), ("m".into(), Value::from(1000)));
        assert_eq!(parse_set("probe_norms=[0,0.1]").unwrap().1, serde_json::json!([0, 0.1]));
        assert_eq!(parse_set("name=abc").unwrap().1, Value::from("abc"));
        assert!(parse_set("novalue").is_err());
    }
}
