//! Checks of the constructed field X* itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::{impl_checked, Check, Relation, Validator};
use crate::error::Result;
use crate::fields::{build_xstar, census_starts, find_rest_points, RestKind, XStarParams};
use crate::integrator::IntegratorConfig;
use crate::jacobian::jacobian;
use crate::manifold::{distance, ManifoldPoint, Space};
use crate::poincare::{find_alpha, from_p_local, polar_rate_check, AlphaData, PolarRateReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XStarVerifyConfig {
    pub params: XStarParams,
    pub jacobian_step: f64,
    pub spectral_tol: f64,
    /// Newton starts per sphere factor.
    pub census_per_factor: usize,
    pub expected_rest_points: usize,
    pub r1_samples: usize,
    pub r1_bound: f64,
    pub seam_grid: usize,
    pub seam_tol: f64,
    pub rng_seed: u64,
}

impl Default for XStarVerifyConfig {
    fn default() -> Self {
        XStarVerifyConfig {
            params: XStarParams::default(),
            jacobian_step: 1e-5,
            spectral_tol: 1e-4,
            census_per_factor: 66,
            expected_rest_points: 4,
            r1_samples: 10_000,
            r1_bound: 0.99,
            seam_grid: 100,
            seam_tol: 1e-8,
            rng_seed: 1,
        }
    }
}

impl XStarVerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Validator::default();
        v.require(self.params.validate().is_ok(), "params", "invalid X* parameters")
            .require(self.jacobian_step > 0.0, "jacobian_step", "must be positive")
            .require(self.spectral_tol > 0.0, "spectral_tol", "must be positive")
            .require(self.census_per_factor > 0, "census_per_factor", "must be positive")
            .require(self.r1_bound > 0.0 && self.r1_bound < 1.0, "r1_bound", "must lie in (0, 1)")
            .require(self.seam_grid > 0, "seam_grid", "must be positive")
            .require(self.seam_tol >= 0.0, "seam_tol", "must be nonnegative");
        v.finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestSummary {
    pub point: ManifoldPoint,
    pub kind: RestKind,
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XStarVerifyReport {
    pub eigenvalues_p: Vec<(f64, f64)>,
    pub eigenvalues_q: Vec<(f64, f64)>,
    pub rest_points: Vec<RestSummary>,
    pub min_r1_rate: f64,
    pub seam_defect: f64,
    pub checks: Vec<Check>,
}
impl_checked!(XStarVerifyReport);

/// Largest distance between two spectra after sorting both by (re, im).
fn spectral_error(got: &[(f64, f64)], want: &[(f64, f64)]) -> f64 {
    let sort = |v: &[(f64, f64)]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    };
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    sort(got).iter().zip(sort(want)).map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1)).fold(0.0, f64::max)
}

pub fn xstar_verify(cfg: &XStarVerifyConfig) -> Result<XStarVerifyReport> {
    cfg.validate()?;
    let sys = build_xstar(cfg.params.clone())?;
    let spectrum = |x: &ManifoldPoint| -> Result<Vec<(f64, f64)>> {
        Ok(jacobian(&sys.field, &x.canonical(), cfg.jacobian_step)?.eigenvalues().iter().map(|l| (l.re, l.im)).collect())
    };
    let eigenvalues_p = spectrum(&sys.p_star)?;
    let eigenvalues_q = spectrum(&sys.q_star)?;
    let want_p = [(-2.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (1.0, -1.0)];
    let want_q = want_p.map(|(a, b)| (-a, -b));

    let starts = census_starts(Space::SpherePair, cfg.census_per_factor, 0.0)?;
    let found = find_rest_points(&sys.field, &starts, 1e-12)?;
    let kind_at = |p: &ManifoldPoint| found.iter().find(|i| distance(&i.point, p).map(|d| d < 1e-8).unwrap_or(false)).map(|i| i.kind);
    let kinds_ok = kind_at(&sys.p_star) == Some(RestKind::Saddle)
        && kind_at(&sys.q_star) == Some(RestKind::Saddle)
        && kind_at(&sys.s_star) == Some(RestKind::Attracting)
        && kind_at(&sys.u_star) == Some(RestKind::Repelling);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let b = cfg.r1_bound;
    let mut min_r1_rate = f64::INFINITY;
    for _ in 0..cfg.r1_samples {
        let x = ManifoldPoint::pair_band(rng.gen_range(-b..=b), rng.gen_range(0.0..TAU), rng.gen_range(-b..=b), rng.gen_range(0.0..TAU))?;
        min_r1_rate = min_r1_rate.min(sys.field.evaluate(&x)?[0]);
    }
    let seam_defect = sys.seam_defect(cfg.seam_grid)?;

    let checks = vec![
        Check::new("spectrum at p*", spectral_error(&eigenvalues_p, &want_p), Relation::Le, cfg.spectral_tol),
        Check::new("spectrum at q*", spectral_error(&eigenvalues_q, &want_q), Relation::Le, cfg.spectral_tol),
        Check::new("rest points found", found.len() as f64, Relation::Le, cfg.expected_rest_points as f64),
        Check::new("rest points found (lower)", found.len() as f64, Relation::Ge, cfg.expected_rest_points as f64),
        Check::flag("p*, q* saddles, s* sink, u* source", kinds_ok),
        Check::new("min dr1/dt off the poles", min_r1_rate, Relation::Gt, 0.0),
        Check::new("seam defect", seam_defect, Relation::Le, cfg.seam_tol),
    ];
    let rest_points = found.into_iter().map(|i| RestSummary { point: i.point, kind: i.kind, eigenvalues: i.eigenvalues }).collect();
    Ok(XStarVerifyReport { eigenvalues_p, eigenvalues_q, rest_points, min_r1_rate, seam_defect, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    pub sigma2_min: f64,
    pub sigma3_max: f64,
    pub integrator: IntegratorConfig,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig { sigma2_min: 1e-2, sigma3_max: 1e-6, integrator: IntegratorConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaReport {
    pub alpha: AlphaData,
    pub end_distance_p: f64,
    pub start_distance_q: f64,
    pub checks: Vec<Check>,
}
impl_checked!(AlphaReport);

/// The heteroclinic α through the origin and the rank of the tangent stack there.
pub fn alpha_check(cfg: &AlphaConfig) -> Result<AlphaReport> {
    let mut v = Validator::default();
    v.require(cfg.sigma2_min > 0.0, "sigma2_min", "must be positive")
        .require(cfg.sigma3_max > 0.0, "sigma3_max", "must be positive")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let sys = build_xstar(XStarParams::default())?;
    let alpha = find_alpha(&sys, &cfg.integrator)?;
    let end = alpha.point_at(&sys.field, alpha.t_plus, &cfg.integrator)?;
    let start = alpha.point_at(&sys.field, alpha.t_minus, &cfg.integrator)?;
    let end_distance_p = distance(&end, &sys.p_star)?;
    let start_distance_q = distance(&start, &sys.q_star)?;
    let sv = alpha.singular_values;
    let checks = vec![
        Check::new("forward end to p*", end_distance_p, Relation::Le, 1e-3 * (1.0 + 1e-6)),
        Check::new("backward end to q*", start_distance_q, Relation::Le, 1e-3 * (1.0 + 1e-6)),
        Check::new("seam residual at the origin", alpha.seam_residual, Relation::Le, 1e-12),
        Check::new("sigma_2", sv[1], Relation::Gt, cfg.sigma2_min),
        Check::new("sigma_3", sv[2], Relation::Lt, cfg.sigma3_max),
    ];
    Ok(AlphaReport { alpha, end_distance_p, start_distance_q, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarConfig {
    pub orbits: usize,
    pub horizon: f64,
    pub linear_tol: f64,
    /// Rates in the blend region must stay within (1 − band, 1 + band).
    pub blend_band: f64,
    pub integrator: IntegratorConfig,
}

impl Default for PolarConfig {
    fn default() -> Self {
        PolarConfig { orbits: 100, horizon: 40.0, linear_tol: 1e-4, blend_band: 0.4, integrator: IntegratorConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarReport {
    pub orbits: Vec<PolarRateReport>,
    pub linear_deviation: f64,
    pub blend_deviation: f64,
    pub blend_samples: usize,
    pub checks: Vec<Check>,
}
impl_checked!(PolarReport);

/// d(log r)/dt and dφ/dt of the unstable block along orbits started near p*.
pub fn polar_rates(cfg: &PolarConfig) -> Result<PolarReport> {
    let mut v = Validator::default();
    v.require(cfg.orbits > 0, "orbits", "must be positive")
        .require(cfg.horizon > 0.0, "horizon", "must be positive")
        .require(cfg.linear_tol > 0.0, "linear_tol", "must be positive")
        .require(cfg.blend_band > 0.0 && cfg.blend_band < 1.0, "blend_band", "must lie in (0, 1)")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let sys = build_xstar(XStarParams::default())?;
    let mut orbits = Vec::with_capacity(cfg.orbits);
    for k in 0..cfg.orbits {
        let a = 2.0 * PI * k as f64 / cfg.orbits as f64;
        let th = 0.3 * k as f64;
        let r0 = 1e-3 * (1.0 + (k % 7) as f64);
        let x = from_p_local([0.1 * th.cos(), 0.1 * th.sin(), r0 * a.cos(), r0 * a.sin()])?;
        orbits.push(polar_rate_check(&sys, &x, cfg.horizon, &cfg.integrator)?);
    }
    let linear_deviation = orbits.iter().map(|o| o.linear.max_deviation(1.0)).fold(0.0, f64::max);
    let blend_deviation = orbits.iter().filter(|o| o.blend.samples > 0).map(|o| o.blend.max_deviation(1.0)).fold(0.0, f64::max);
    let blend_samples = orbits.iter().map(|o| o.blend.samples).sum();
    let checks = vec![
        Check::new("linear region rate deviation", linear_deviation, Relation::Le, cfg.linear_tol),
        Check::new("blend region rate deviation", blend_deviation, Relation::Lt, cfg.blend_band),
        Check::new("blend samples", blend_samples as f64, Relation::Gt, 0.0),
    ];
    Ok(PolarReport { orbits, linear_deviation, blend_deviation, blend_samples, checks })
}
