//! Matcher checks: exactness against enumeration, Lipschitz shadowing near a
//! hyperbolic saddle, and the expansion predicate table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{impl_checked, Check, Relation, Validator};
use crate::error::Result;
use crate::fields::linear_field_rows;
use crate::integrator::IntegratorConfig;
use crate::manifold::{distance, ManifoldPoint};
use crate::pseudo::{verify_pseudo, Pseudotrajectory, Segment};
use crate::shadow::{brute_force_match, dp_match, match_oriented, weakest_expansion_bound, ShadowOptions, Steps};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub trials: usize,
    pub max_samples: usize,
    pub dim: usize,
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { trials: 100, max_samples: 6, dim: 2, rng_seed: 3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub trials: usize,
    pub agreements: usize,
    pub matched: usize,
    pub checks: Vec<Check>,
}
impl_checked!(OracleReport);

/// DP matcher against exhaustive enumeration on random small instances,
/// cycling through unconstrained and banded column steps.
pub fn matcher_oracle(cfg: &OracleConfig) -> Result<OracleReport> {
    let mut v = Validator::default();
    v.require(cfg.trials > 0, "trials", "must be positive")
        .require((1..=8).contains(&cfg.max_samples), "max_samples", "must lie in 1..=8")
        .require(cfg.dim > 0, "dim", "must be positive");
    v.finish()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let point = |rng: &mut ChaCha8Rng| ManifoldPoint::euclidean((0..cfg.dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (mut agreements, mut matched) = (0, 0);
    for trial in 0..cfg.trials {
        let n = rng.gen_range(1..=cfg.max_samples);
        let m = rng.gen_range(1..=cfg.max_samples);
        let pseudo = (0..n).map(|_| point(&mut rng)).collect::<Result<Vec<_>>>()?;
        let orbit = (0..m).map(|_| point(&mut rng)).collect::<Result<Vec<_>>>()?;
        let eps = rng.gen_range(0.0..2.0);
        let steps = [Steps::MONOTONE, Steps { lo: 1, hi: Some(2) }, Steps { lo: 1, hi: Some(1) }][trial % 3];
        let d = pseudo.iter().map(|x| orbit.iter().map(|y| distance(x, y)).collect::<Result<Vec<f64>>>()).collect::<Result<Vec<_>>>()?;
        let dp = dp_match(&d, steps);
        let brute = brute_force_match(&orbit, &pseudo, eps, steps)?;
        let agree = match (&dp, &brute) {
            (None, None) => true,
            (Some(p), Some(q)) => {
                matched += q.found as usize;
                p.value == q.value && (p.value < eps) == q.found
            }
            _ => false,
        };
        agreements += agree as usize;
    }
    let checks = vec![Check::new("agreements", agreements as f64, Relation::Ge, cfg.trials as f64)];
    Ok(OracleReport { trials: cfg.trials, agreements, matched, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    /// Defect levels d; the first one is held to distance ≤ eps_factor·d.
    pub defects: Vec<f64>,
    /// Anchor noise as a fraction of d.
    pub noise: f64,
    pub horizon: f64,
    pub eps_factor: f64,
    /// Allowed spread of distance/d across the defect levels.
    pub ratio_factor: f64,
    pub rng_seed: u64,
    pub shadow: ShadowOptions,
    pub integrator: IntegratorConfig,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            defects: vec![1e-3, 1e-4],
            noise: 1.0 / 12.0,
            horizon: 20.0,
            eps_factor: 10.0,
            ratio_factor: 2.0,
            rng_seed: 17,
            shadow: ShadowOptions::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleRun {
    pub d: f64,
    pub sup_defect: f64,
    pub found: bool,
    pub distance: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleReport {
    pub runs: Vec<SaddleRun>,
    pub checks: Vec<Check>,
}
impl_checked!(SaddleReport);

/// Unit segments of the saddle diag(−1, 1) anchored at γ(k) + noise·d·ξ_k,
/// γ(t) = (e^{−t}, e^{t−T}), |ξ_k| ≤ 1. The same ξ_k are reused for every d.
pub fn noisy_saddle_pseudo(d: f64, noise: f64, horizon: f64, rng_seed: u64) -> Result<Pseudotrajectory> {
    let field = linear_field_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]])?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = horizon.ceil() as usize;
    let segs = (0..n)
        .map(|k| {
            let t = k as f64;
            let r = rng.gen_range(0.0..1.0f64).sqrt();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = vec![(-t).exp() + noise * d * r * th.cos(), (t - horizon).exp() + noise * d * r * th.sin()];
            Ok(Segment::frozen(t, ManifoldPoint::euclidean(x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Pseudotrajectory::new(&field, segs, (0.0, horizon), 1.0)
}

/// Oriented shadowing of noisy saddle pseudotrajectories with ε = eps_factor·d.
pub fn saddle_noise(cfg: &SaddleConfig) -> Result<SaddleReport> {
    let mut v = Validator::default();
    v.require(!cfg.defects.is_empty() && cfg.defects.iter().all(|&d| d > 0.0 && d < 0.1), "defects", "need values in (0, 0.1)")
        .require(cfg.noise > 0.0 && cfg.noise <= 1.0, "noise", "must lie in (0, 1]")
        .require(cfg.horizon >= 2.0, "horizon", "must be at least 2")
        .require(cfg.eps_factor > 0.0, "eps_factor", "must be positive")
        .require(cfg.ratio_factor >= 1.0, "ratio_factor", "must be at least 1")
        .require(cfg.shadow.validate().is_ok(), "shadow", "invalid shadow options")
        .require(cfg.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
    v.finish()?;
    let field = linear_field_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]])?;
    let mut runs = Vec::with_capacity(cfg.defects.len());
    for &d in &cfg.defects {
        let g = noisy_saddle_pseudo(d, cfg.noise, cfg.horizon, cfg.rng_seed)?;
        let defect = verify_pseudo(&field, &g, 0.1, 0.05, &cfg.integrator)?;
        let opts = ShadowOptions { seed_time: Some(0.5 * cfg.horizon), ..cfg.shadow.clone() };
        let r = match_oriented(&field, &g, cfg.eps_factor * d, &opts, &cfg.integrator)?;
        runs.push(SaddleRun { d, sup_defect: defect.sup_defect, found: r.found, distance: r.distance, ratio: r.distance / d });
    }
    let mut checks = Vec::new();
    for r in &runs {
        checks.push(Check::new(format!("sup defect at d = {:e}", r.d), r.sup_defect, Relation::Lt, r.d));
    }
    let first = &runs[0];
    checks.push(Check::new(format!("oriented distance at d = {:e}", first.d), first.distance, Relation::Le, cfg.eps_factor * first.d));
    let lo = runs.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.ratio).fold(0.0, f64::max);
    checks.push(Check::new("distance/d spread", hi / lo, Relation::Le, cfg.ratio_factor));
    Ok(SaddleReport { runs, checks })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub k: f64,
    pub c: f64,
    pub mu: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub expected: bool,
    pub got: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionTableReport {
    pub rows: Vec<ExpansionRow>,
    pub checks: Vec<Check>,
}
impl_checked!(ExpansionTableReport);

/// The expansion predicate on its boundary case and on one case each side.
pub fn expansion_table() -> Result<ExpansionTableReport> {
    let (c, l, a) = (3.0, 0.7, 0.4);
    let cases = [
        (c, 2.0 * l, a / 2.0, true),
        (c, 2.0 * l, a / 4.0, true),
        (c / 10.0, 1.01 * l, 0.49 * a, false),
    ];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, (k, mu, b, expected)) in cases.into_iter().enumerate() {
        let got = weakest_expansion_bound(k, c, mu, l, a, b)?;
        checks.push(Check::flag(format!("case {}", i + 1), got == expected));
        rows.push(ExpansionRow { k, c, mu, lambda: l, a, b, expected, got });
    }
    Ok(ExpansionTableReport { rows, checks })
}
