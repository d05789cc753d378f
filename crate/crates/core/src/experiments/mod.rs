//! Configured, reproducible runs of the constructions, each producing a JSON
//! report with explicit pass/fail checks.

mod balls;
mod drift;
mod matching;
mod xstar;

pub use balls::{four_balls, perturb, ps_delta, three_balls, Anchors, BallsConfig, BallsReport, PsDeltaConfig, PsDeltaDraw, PsDeltaReport};
pub use drift::{case_b1, closed_orbit_section, orbit_drift, rest_drift, CaseB1Config, CaseB1Report, OrbitDriftConfig, OrbitDriftReport, RestDriftConfig, RestDriftReport};
pub use matching::{expansion_table, matcher_oracle, noisy_saddle_pseudo, saddle_noise, ExpansionTableReport, ExpansionRow, OracleConfig, OracleReport, SaddleConfig, SaddleReport, SaddleRun};
pub use xstar::{alpha_check, polar_rates, xstar_verify, RestSummary, AlphaConfig, AlphaReport, PolarConfig, PolarReport, XStarVerifyConfig, XStarVerifyReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

/// One named numeric assertion of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound,
            Relation::Gt => value > bound,
            Relation::Ge => value >= bound,
        };
        Check { name: name.into(), value, relation, bound, passed }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Relation::Ge, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Passed,
    Violation,
    BudgetExhausted,
}

pub trait Checked {
    fn checks(&self) -> &[Check];

    fn budget_exhausted(&self) -> bool {
        false
    }

    fn outcome(&self) -> Outcome {
        if self.budget_exhausted() {
            Outcome::BudgetExhausted
        } else if self.checks().iter().all(|c| c.passed) {
            Outcome::Passed
        } else {
            Outcome::Violation
        }
    }

    fn failures(&self) -> Vec<&Check> {
        self.checks().iter().filter(|c| !c.passed).collect()
    }
}

/// Collects every invalid field before failing.
#[derive(Default)]
pub struct Validator {
    bad: Vec<String>,
}

impl Validator {
    pub fn require(&mut self, ok: bool, field: &str, why: &str) -> &mut Self {
        if !ok {
            self.bad.push(format!("{field}: {why}"));
        }
        self
    }

    pub fn finish(&self) -> Result<()> {
        if self.bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid config: {}", self.bad.join("; "))))
        }
    }
}

macro_rules! impl_checked {
    ($($t:ty),*) => {$(
        impl $crate::experiments::Checked for $t {
            fn checks(&self) -> &[$crate::experiments::Check] {
                &self.checks
            }
        }
    )*};
}
pub(crate) use impl_checked;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::new("a", 1.0, Relation::Le, 1.0).passed);
        assert!(!Check::new("a", 1.0, Relation::Lt, 1.0).passed);
        assert!(Check::new("a", 2.0, Relation::Gt, 1.0).passed);
        assert!(!Check::flag("f", false).passed);
    }

    #[test]
    fn validator_lists_everything() {
        let mut v = Validator::default();
        v.require(false, "eps", "must be positive").require(true, "m", "").require(false, "n", "must be ≥ 1");
        let e = v.finish().unwrap_err().to_string();
        assert!(e.contains("eps") && e.contains("n:") && !e.contains("m:"));
    }
}
