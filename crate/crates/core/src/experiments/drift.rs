//! The two non-shadowable constructions near nonhyperbolic elements, and the
//! single-jump pseudotrajectory near a hyperbolic saddle.

use serde::{Deserialize, Serialize};

use super::{impl_checked, Check, Relation, Validator};
use crate::error::Result;
use crate::fields::{closed_orbit_field, linear_field_rows};
use crate::integrator::IntegratorConfig;
use crate::manifold::ManifoldPoint;
use crate::poincare::{poincare_map, Direction, TransverseSection};
use crate::pseudo::{case_b1_pseudo, lemma1_orbit_pseudo, lemma1_rest_pseudo, verify_pseudo, DefectReport};
use crate::shadow::{match_orbital, ShadowOptions, ShadowingReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestDriftConfig {
    pub eps: f64,
    pub m: f64,
    /// Seeds per coordinate around the start of the drift.
    pub seed_grid: usize,
    pub seed_radius: f64,
    /// Allowance below 2ε for sampling.
    pub tolerance: f64,
    pub defect_bound: f64,
    pub tau_step: f64,
    pub t_step: f64,
    pub nm_evals: usize,
    pub integrator: IntegratorConfig,
}

impl Default for RestDriftConfig {
    fn default() -> Self {
        RestDriftConfig {
            eps: 0.1,
            m: 1000.0,
            seed_grid: 50,
            seed_radius: 0.45,
            tolerance: 0.005,
            defect_bound: 2e-3,
            tau_step: 0.1,
            t_step: 0.05,
            nm_evals: 200,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestDriftReport {
    pub defect: DefectReport,
    pub orbital: ShadowingReport,
    pub checks: Vec<Check>,
}
impl_checked!(RestDriftReport);

/// Drift across a line of rest points: every orbit stays at Hausdorff
/// distance ≥ 2ε from the pseudotrajectory.
pub fn rest_drift(cfg: &RestDriftConfig) -> Result<RestDriftReport> {
    let mut v = Validator::default();
    v.require(cfg.eps > 0.0 && cfg.eps < 0.5, "eps", "must lie in (0, 0.5)")
        .require(cfg.m >= 1.0, "m", "must be at least 1")
        .require(cfg.seed_radius > 0.0, "seed_radius", "must be positive")
        .require(cfg.tolerance >= 0.0, "tolerance", "must be nonnegative")
        .require(cfg.tau_step > 0.0, "tau_step", "must be positive")
        .require(cfg.t_step > 0.0, "t_step", "must be positive")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let (field, g) = lemma1_rest_pseudo(cfg.eps, cfg.m)?;
    let defect = verify_pseudo(&field, &g, cfg.tau_step, cfg.t_step, &cfg.integrator)?;
    let opts = ShadowOptions {
        tau_step: cfg.tau_step,
        t_step: cfg.t_step,
        seed_grid: cfg.seed_grid,
        seed_radius: Some(cfg.seed_radius),
        budget: cfg.seed_grid.pow(2).max(1),
        nm_evals: cfg.nm_evals,
        seed_time: Some(g.window.0),
        ..ShadowOptions::default()
    };
    let orbital = match_orbital(&field, &g, 2.0 * cfg.eps, &opts, &cfg.integrator)?;
    let checks = vec![
        Check::new("sup defect", defect.sup_defect, Relation::Le, cfg.defect_bound),
        Check::new("best orbital distance", orbital.distance, Relation::Ge, 2.0 * cfg.eps - cfg.tolerance),
        Check::flag("no orbital shadow below 2 eps", !orbital.found),
    ];
    Ok(RestDriftReport { defect, orbital, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitDriftConfig {
    pub omega: f64,
    /// |v| of the last anchor.
    pub a: f64,
    pub n: usize,
    /// Initial |v| of the orbits whose section hits are tracked.
    pub probe_norms: Vec<f64>,
    pub probe_returns: usize,
    pub norm_tol: f64,
    pub min_gap: f64,
    pub integrator: IntegratorConfig,
}

impl Default for OrbitDriftConfig {
    fn default() -> Self {
        OrbitDriftConfig {
            omega: 0.1,
            a: 0.2,
            n: 100,
            probe_norms: vec![0.0, 0.05, 0.1, 0.2],
            probe_returns: 100,
            norm_tol: 1e-6,
            min_gap: 0.1,
            integrator: IntegratorConfig::with_tol(1e-11),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitDriftReport {
    /// Per probe orbit: min and max |v| over its section hits.
    pub probe_norm_ranges: Vec<(f64, f64)>,
    pub start_norm: f64,
    pub end_norm: f64,
    pub sup_defect: f64,
    pub checks: Vec<Check>,
}
impl_checked!(OrbitDriftReport);

/// The section {x₂ = 0} near (1, 0, 0, 0) with coordinates (x₁ − 1, v₁, v₂).
pub fn closed_orbit_section(field: &crate::field::VectorFieldDef) -> Result<TransverseSection> {
    let e = |k: usize| (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    TransverseSection::with_frame(field, ManifoldPoint::euclidean(vec![1.0, 0.0, 0.0, 0.0])?, &e(1), vec![e(0), e(2), e(3)], 0.5)
}

/// Drift outward in the neutral block of a closed orbit: orbits keep |v| on
/// the section, the pseudotrajectory changes it by a.
pub fn orbit_drift(cfg: &OrbitDriftConfig) -> Result<OrbitDriftReport> {
    let mut v = Validator::default();
    v.require(cfg.omega.is_finite(), "omega", "must be finite")
        .require(cfg.a > 0.0 && cfg.a < 0.5, "a", "must lie in (0, 0.5)")
        .require(cfg.n > 0, "n", "must be positive")
        .require(cfg.probe_norms.iter().all(|&r| (0.0..0.5).contains(&r)), "probe_norms", "must lie in [0, 0.5)")
        .require(cfg.probe_returns > 0, "probe_returns", "must be positive")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let field = closed_orbit_field(cfg.omega);
    let section = closed_orbit_section(&field)?;
    let vn = |u: &[f64]| u[1].hypot(u[2]);
    let mut probe_norm_ranges = Vec::with_capacity(cfg.probe_norms.len());
    for &r in &cfg.probe_norms {
        let mut u = vec![0.0, r, 0.0];
        let (mut lo, mut hi) = (r, r);
        for _ in 0..cfg.probe_returns {
            u = poincare_map(&field, &section, &section, &u, Direction::Forward, 100.0, &cfg.integrator)?.u;
            lo = lo.min(vn(&u));
            hi = hi.max(vn(&u));
        }
        probe_norm_ranges.push((lo, hi));
    }
    let op = lemma1_orbit_pseudo(&field, &section, &[cfg.a, 0.0], cfg.n, &cfg.integrator)?;
    let start_norm = vn(&op.anchors_u[0]);
    let end_norm = vn(op.anchors_u.last().expect("n ≥ 1 anchors"));
    let sup_defect = op.pseudo.jumps(&field, &cfg.integrator)?.iter().map(|j| j.1).fold(0.0, f64::max);
    let spread = probe_norm_ranges.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let checks = vec![
        Check::new("largest |v| spread along one orbit", spread, Relation::Le, cfg.norm_tol),
        Check::new("pseudo start/end |v| gap", (end_norm - start_norm).abs(), Relation::Ge, cfg.min_gap),
        Check::new("largest jump", sup_defect, Relation::Le, 1.01 * cfg.a / cfg.n as f64),
    ];
    Ok(OrbitDriftReport { probe_norm_ranges, start_norm, end_norm, sup_defect, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseB1Config {
    /// Diagonal of the linear saddle in the chart (y; v, w).
    pub diagonal: Vec<f64>,
    pub r: Vec<f64>,
    pub a: f64,
    pub lambda: f64,
    pub big_t: f64,
    pub defect_bound: f64,
    pub integrator: IntegratorConfig,
}

impl Default for CaseB1Config {
    fn default() -> Self {
        CaseB1Config {
            diagonal: vec![-1.0, 1.0, 2.0],
            r: vec![0.5, 0.0, 0.0],
            a: 0.1,
            lambda: 1.0,
            big_t: 7.0,
            defect_bound: 1e-3,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseB1Report {
    pub jump: f64,
    pub expected_jump: f64,
    pub defect: DefectReport,
    pub checks: Vec<Check>,
}
impl_checked!(CaseB1Report);

pub fn case_b1(cfg: &CaseB1Config) -> Result<CaseB1Report> {
    let mut v = Validator::default();
    v.require(cfg.diagonal.len() >= 2, "diagonal", "needs at least 2 entries")
        .require(cfg.r.len() == cfg.diagonal.len(), "r", "must match the diagonal length")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let n = cfg.diagonal.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { cfg.diagonal[i] } else { 0.0 }).collect()).collect();
    let field = linear_field_rows(&rows)?;
    let g = case_b1_pseudo(&field, &ManifoldPoint::euclidean(cfg.r.clone())?, cfg.a, cfg.lambda, cfg.big_t)?;
    let jump = g.jumps(&field, &cfg.integrator)?.first().map_or(0.0, |j| j.1);
    let expected_jump = cfg.a * (-cfg.lambda * cfg.big_t).exp();
    let defect = verify_pseudo(&field, &g, 0.1, 0.05, &cfg.integrator)?;
    let checks = vec![
        Check::new("jump error", (jump - expected_jump).abs(), Relation::Le, 1e-12 + 1e-9 * expected_jump),
        Check::new("sup defect", defect.sup_defect, Relation::Le, cfg.defect_bound),
    ];
    Ok(CaseB1Report { jump, expected_jump, defect, checks })
}
