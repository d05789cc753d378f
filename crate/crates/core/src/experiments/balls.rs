//! Experiments on X* near the heteroclinic orbit α: ball chains and Ps(δ)
//! shadowing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{impl_checked, Check, Checked, Relation, Validator};
use crate::error::Result;
use crate::fields::{build_xstar, XStarParams, XStarSystem};
use crate::integrator::{integrate, IntegratorConfig};
use crate::manifold::{distance, point_from_chart, Chart, ManifoldPoint, Space, SphereChart};
use crate::optim::brent_root;
use crate::poincare::{
    ball_entry_time, find_alpha, four_balls_search, phase_matched_seed, three_balls_search, BallChain, BallSearchOptions,
    BallSearchReport, Direction, LocalSections,
};
use crate::pseudo::{ps_delta_pseudo, verify_pseudo};
use crate::shadow::{match_oriented, ShadowOptions};

/// Points of α at distance `reach` from q* and p*, the times they are reached,
/// and points z_q ∈ W^u_loc(q*), z_p ∈ W^u_loc(p*) at the same distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Anchors {
    pub t_q: f64,
    pub t_p: f64,
    pub y_q: ManifoldPoint,
    pub y_p: ManifoldPoint,
    pub z_q: ManifoldPoint,
    pub z_p: ManifoldPoint,
}

impl Anchors {
    pub fn new(sys: &XStarSystem, reach: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let o = ManifoldPoint::pair_band(0.0, 0.0, 0.0, 0.0)?;
        let t_p = ball_entry_time(&sys.field, &o, &sys.p_star, reach, Direction::Forward, 100.0, cfg)?;
        let t_q = -ball_entry_time(&sys.field, &o, &sys.q_star, reach, Direction::Backward, 100.0, cfg)?.abs();
        let c = sys.params.g1_pole_value;
        Ok(Anchors {
            t_q,
            t_p,
            y_q: integrate(&sys.field, &o, t_q, cfg)?,
            y_p: integrate(&sys.field, &o, t_p, cfg)?,
            z_q: ManifoldPoint::new(Space::SpherePair, Chart::Pair(SphereChart::South, SphereChart::Band), vec![0.0, 0.0, reach, c])?,
            z_p: ManifoldPoint::new(Space::SpherePair, Chart::Pair(SphereChart::North, SphereChart::Band), vec![0.0, 0.0, reach, 0.0])?,
        })
    }

    pub fn transit(&self) -> f64 {
        self.t_p - self.t_q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallsConfig {
    /// Neighbourhood size; the anchors sit at distance m/2 from the saddles.
    pub m: f64,
    /// Ball radius.
    pub m1: f64,
    pub section_radius: f64,
    pub search: BallSearchOptions,
    pub integrator: IntegratorConfig,
}

impl Default for BallsConfig {
    fn default() -> Self {
        BallsConfig {
            m: 0.2,
            m1: 0.05,
            section_radius: 0.2,
            search: BallSearchOptions::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl BallsConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Validator::default();
        v.require(self.m > 0.0 && self.m < 1.0, "m", "must lie in (0, 1)")
            .require(self.m1 > 0.0 && self.m1 <= self.m, "m1", "must lie in (0, m]")
            .require(self.section_radius > 0.0, "section_radius", "must be positive")
            .require(self.search.validate().is_ok(), "search", "grid ≥ 2, budget ≥ 1 and positive steps required")
            .require(self.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
        v.finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallsReport {
    pub balls: usize,
    pub anchors: Anchors,
    pub search: BallSearchReport,
    pub checks: Vec<Check>,
    pub budget_exhausted: bool,
}

impl Checked for BallsReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }

    fn budget_exhausted(&self) -> bool {
        self.budget_exhausted
    }
}

fn ball_setup(cfg: &BallsConfig) -> Result<(XStarSystem, Anchors, LocalSections)> {
    cfg.validate()?;
    let sys = build_xstar(XStarParams::default())?;
    let anchors = Anchors::new(&sys, 0.5 * cfg.m, &cfg.integrator)?;
    let sections = LocalSections::new(&sys, &anchors.y_q, &anchors.y_p, cfg.section_radius, anchors.transit())?;
    Ok((sys, anchors, sections))
}

fn ball_report(balls: usize, anchors: Anchors, search: BallSearchReport, mut checks: Vec<Check>) -> BallsReport {
    checks.insert(0, Check::flag("orbit visits the balls in order", search.found));
    checks.push(Check::new("seeds evaluated", search.seeds_evaluated as f64, Relation::Le, search.budget as f64));
    if search.found {
        let increasing = search.hit_times.windows(2).all(|w| w[0] < w[1]);
        checks.push(Check::flag("hit times increase", increasing));
    }
    let budget_exhausted = !search.found && search.seeds_evaluated >= search.budget;
    BallsReport { balls, anchors, search, checks, budget_exhausted }
}

/// Orbit through B(m₁, z_q), B(m₁, y_q), B(m₁, y_p), B(m₁, z_p) in this order.
pub fn four_balls(cfg: &BallsConfig) -> Result<BallsReport> {
    let (sys, a, sections) = ball_setup(cfg)?;
    let chain = BallChain::new(vec![(a.z_q.clone(), cfg.m1), (a.y_q.clone(), cfg.m1), (a.y_p.clone(), cfg.m1), (a.z_p.clone(), cfg.m1)])?;
    let search = four_balls_search(&sys, &sections, &chain, &cfg.search, &cfg.integrator)?;
    Ok(ball_report(4, a, search, vec![]))
}

/// Orbit through B(m₁, z_q), B(m₁, y_q), B(m₁, y_p) that lies on W^s(p*).
pub fn three_balls(cfg: &BallsConfig) -> Result<BallsReport> {
    let (sys, a, sections) = ball_setup(cfg)?;
    let chain = BallChain::new(vec![(a.z_q.clone(), cfg.m1), (a.y_q.clone(), cfg.m1), (a.y_p.clone(), cfg.m1)])?;
    let search = three_balls_search(&sys, &sections, &chain, &cfg.search, &cfg.integrator)?;
    let on_ws = search.ws_entry_time.is_some();
    Ok(ball_report(3, a, search, vec![Check::flag("seed enters a 1e-3 ball around p* and stays", on_ws)]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsDeltaConfig {
    pub delta: f64,
    pub draws: usize,
    pub rng_seed: u64,
    /// Matching threshold.
    pub eps: f64,
    /// y_q, y_p sit at distance m/2 from q*, p*.
    pub m: f64,
    pub section_radius: f64,
    /// Radius in the unstable blocks at which exit angles are compared.
    pub phase_radius: f64,
    pub shadow: ShadowOptions,
    pub search: BallSearchOptions,
    pub integrator: IntegratorConfig,
}

impl Default for PsDeltaConfig {
    fn default() -> Self {
        PsDeltaConfig {
            delta: 1e-3,
            draws: 10,
            rng_seed: 2024,
            eps: 0.05,
            m: 0.2,
            section_radius: 0.2,
            phase_radius: 0.1,
            shadow: ShadowOptions { seed_grid: 0, nm_evals: 100, tau_step: 0.05, t_step: 0.01, ..ShadowOptions::default() },
            search: BallSearchOptions::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl PsDeltaConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Validator::default();
        v.require(self.delta > 0.0 && self.delta < 0.05, "delta", "must lie in (0, 0.05)")
            .require(self.draws > 0, "draws", "must be positive")
            .require(self.eps > 0.0, "eps", "must be positive")
            .require(self.m > 0.0 && self.m < 1.0, "m", "must lie in (0, 1)")
            .require(self.section_radius > 0.0, "section_radius", "must be positive")
            .require(self.phase_radius > 0.0 && self.phase_radius <= 0.2, "phase_radius", "must lie in (0, 0.2]")
            .require(self.shadow.validate().is_ok(), "shadow", "invalid shadow options")
            .require(self.search.validate().is_ok(), "search", "invalid seed-search options")
            .require(self.integrator.validate().is_ok(), "integrator", "invalid tolerances or steps");
        v.finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsDeltaDraw {
    pub x_q: ManifoldPoint,
    pub x_p: ManifoldPoint,
    pub jump_q: f64,
    pub jump_p: f64,
    pub sup_defect: f64,
    pub found: bool,
    pub distance: f64,
    pub seed: Option<ManifoldPoint>,
    pub phase_residuals: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsDeltaReport {
    pub t_q: f64,
    pub t_p: f64,
    pub draws: Vec<PsDeltaDraw>,
    pub checks: Vec<Check>,
}
impl_checked!(PsDeltaReport);

/// A point at a random distance in [0.1δ, δ) from y, in a random chart direction.
pub fn perturb(y: &ManifoldPoint, delta: f64, rng: &mut ChaCha8Rng) -> Result<ManifoldPoint> {
    let y = y.canonical();
    let dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..y.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            break v.iter().map(|x| x / n).collect();
        }
    };
    let target = delta * rng.gen_range(0.1..1.0);
    let at = |s: f64| point_from_chart(y.space, y.chart, y.coords.iter().zip(&dir).map(|(c, d)| c + s * d).collect());
    let gap = |s: f64| -> Result<f64> { Ok(distance(&at(s)?, &y)? - target) };
    let mut hi = target;
    while gap(hi)? < 0.0 {
        hi *= 2.0;
    }
    let s = brent_root(gap, 0.0, hi, 1e-16, 200)?;
    at(s)
}

/// Random Ps(δ) pseudotrajectories around α, each searched for an oriented
/// shadow seeded by the phase-matched point of L_p.
pub fn ps_delta(cfg: &PsDeltaConfig) -> Result<PsDeltaReport> {
    cfg.validate()?;
    let ic = &cfg.integrator;
    let sys = build_xstar(XStarParams::default())?;
    let alpha = find_alpha(&sys, ic)?;
    let a = Anchors::new(&sys, 0.5 * cfg.m, ic)?;
    let sections = LocalSections::new(&sys, &a.y_q, &a.y_p, cfg.section_radius, a.transit())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut draws = Vec::with_capacity(cfg.draws);
    for _ in 0..cfg.draws {
        let x_q = perturb(&a.y_q, cfg.delta, &mut rng)?;
        let x_p = perturb(&a.y_p, cfg.delta, &mut rng)?;
        let g = ps_delta_pseudo(&sys.field, &alpha, a.t_q, a.t_p, &x_q, &x_p, cfg.delta, ic)?;
        let defect = verify_pseudo(&sys.field, &g, 0.5, 0.25, ic)?;
        let phase = phase_matched_seed(&sys, &sections, &x_q, &x_p, cfg.phase_radius, &cfg.search, ic)?;
        let opts = ShadowOptions { seed_time: Some(a.t_p), extra_seeds: vec![phase.seed.clone()], ..cfg.shadow.clone() };
        let r = match_oriented(&sys.field, &g, cfg.eps, &opts, ic)?;
        draws.push(PsDeltaDraw {
            jump_q: distance(&x_q, &a.y_q)?,
            jump_p: distance(&x_p, &a.y_p)?,
            x_q,
            x_p,
            sup_defect: defect.sup_defect,
            found: r.found,
            distance: r.distance,
            seed: r.seed,
            phase_residuals: phase.residuals,
        });
    }
    let worst = draws.iter().map(|d| d.distance).fold(0.0, f64::max);
    let jump = draws.iter().map(|d| d.jump_q.max(d.jump_p)).fold(0.0, f64::max);
    let checks = vec![
        Check::new("largest jump", jump, Relation::Le, cfg.delta),
        Check::new("draws matched", draws.iter().filter(|d| d.found).count() as f64, Relation::Ge, cfg.draws as f64),
        Check::new("worst oriented distance", worst, Relation::Le, cfg.eps),
    ];
    Ok(PsDeltaReport { t_q: a.t_q, t_p: a.t_p, draws, checks })
}
