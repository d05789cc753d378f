//! Searches for orbits passing successively through small balls around
//! z_q, y_q, y_p (and z_p) near α.
//!
//! Seeds live on the surface L_p ⊂ S_p spanned by l_p = S_p ∩ W^s_loc(p*) and
//! the image F(l_q) of l_q = S_q ∩ W^u_loc(q*), where F: S_q → S_p is the
//! first-hit map along α. A point x = F(y_q + δ_q e_q) + δ_p e_p has
//! coordinates (r_p, r_q): the radius of its (x₃, x₄) block at p* and of the
//! (y₃, y₄) block of F⁻¹(x) at q*.

use serde::{Deserialize, Serialize};

use super::alpha::{from_p_local, from_q_local};
use super::{poincare_map, Direction, TransverseSection};
use crate::error::{Error, Result};
use crate::fields::XStarSystem;
use crate::integrator::{sample_times, IntegratorConfig};
use crate::manifold::{distance, ManifoldPoint};
use crate::optim::brent_root;
use crate::trajectory::{trajectory, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallChain {
    /// (center, radius), to be visited in this order as time grows.
    pub balls: Vec<(ManifoldPoint, f64)>,
}

impl BallChain {
    pub fn new(balls: Vec<(ManifoldPoint, f64)>) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::InvalidArgument("empty ball chain".into()));
        }
        if balls.iter().any(|(_, r)| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("ball radii must be positive".into()));
        }
        if balls.iter().any(|(c, _)| c.space != balls[0].0.space) {
            return Err(Error::SpaceMismatch(balls[0].0.space.id(), "mixed".into()));
        }
        Ok(BallChain { balls })
    }
}

/// Earliest strictly increasing entry times of a time-ordered sample into the
/// balls of the chain, in order; None if some ball is never reached.
pub fn ordered_hits(samples: &[(f64, ManifoldPoint)], chain: &BallChain) -> Option<Vec<f64>> {
    let mut hits = Vec::with_capacity(chain.balls.len());
    let mut k = 0;
    for (t, x) in samples {
        let (c, r) = &chain.balls[k];
        if distance(x, c).map(|d| d < *r).unwrap_or(false) {
            hits.push(*t);
            k += 1;
            if k == chain.balls.len() {
                return Some(hits);
            }
        }
    }
    None
}

/// The sections S_q ∋ y_q and S_p ∋ y_p: {ξ = const} in the pole charts, with
/// section coordinates (η, x₃, x₄).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalSections {
    pub s_p: TransverseSection,
    pub s_q: TransverseSection,
    /// Time from y_q to y_p along α.
    pub transit: f64,
}

impl LocalSections {
    pub fn new(sys: &XStarSystem, y_q: &ManifoldPoint, y_p: &ManifoldPoint, radius: f64, transit: f64) -> Result<Self> {
        let e = |k: usize| (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let lp = super::p_local(y_p)?;
        let lq = super::q_local(sys, y_q)?;
        let s_p = TransverseSection::with_frame(&sys.field, from_p_local(lp)?, &e(0), vec![e(1), e(2), e(3)], radius)?;
        let s_q = TransverseSection::with_frame(&sys.field, from_q_local(sys, lq)?, &e(0), vec![e(1), e(2), e(3)], radius)?;
        Ok(LocalSections { s_p, s_q, transit })
    }

    fn cap(&self) -> f64 {
        2.0 * self.transit + 10.0
    }

    /// F: S_q → S_p.
    pub fn forward(&self, sys: &XStarSystem, u: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
        Ok(poincare_map(&sys.field, &self.s_q, &self.s_p, u, Direction::Forward, self.cap(), cfg)?.u)
    }

    /// F⁻¹: S_p → S_q.
    pub fn backward(&self, sys: &XStarSystem, u: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
        Ok(poincare_map(&sys.field, &self.s_p, &self.s_q, u, Direction::Backward, self.cap(), cfg)?.u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSearchOptions {
    /// Grid size per seed coordinate.
    pub grid: usize,
    /// Maximum number of seeds whose full orbit is examined.
    pub budget: usize,
    /// Orbit sampling step for ball tests.
    pub dt: f64,
    /// The seed radii r_p, r_q run over [r_max·e^{−span}, r_max].
    pub log_span: f64,
    /// Largest |δ| along e_p or e_q; further capped so that the seed stays
    /// within half a ball radius of y_p (or y_q).
    pub delta_max: f64,
    /// Lower bound for the expansion rate of the (x₃, x₄) block, used for the horizon.
    pub rate_floor: f64,
}

impl Default for BallSearchOptions {
    fn default() -> Self {
        BallSearchOptions { grid: 100, budget: 10_000, dt: 0.01, log_span: std::f64::consts::TAU, delta_max: 0.02, rate_floor: 0.6 }
    }
}

impl BallSearchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 || self.budget == 0 || !(self.dt > 0.0) || !(self.log_span > 0.0) || !(self.delta_max > 0.0) || !(self.rate_floor > 0.0) {
            return Err(Error::InvalidArgument(format!("bad ball-search options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallSearchReport {
    pub found: bool,
    pub seeds_evaluated: usize,
    pub rows_evaluated: usize,
    pub budget: usize,
    pub seed: Option<ManifoldPoint>,
    pub r_p: Option<f64>,
    pub r_q: Option<f64>,
    /// Signs of δ_q and δ_p (which half-surfaces were used).
    pub orientation: Option<(i8, i8)>,
    pub hit_times: Vec<f64>,
    /// Three-balls only: forward entry time into B(10⁻³, p*).
    pub ws_entry_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
}

impl BallSearchReport {
    fn empty(budget: usize) -> Self {
        BallSearchReport {
            found: false,
            seeds_evaluated: 0,
            rows_evaluated: 0,
            budget,
            seed: None,
            r_p: None,
            r_q: None,
            orientation: None,
            hit_times: vec![],
            ws_entry_time: None,
            trajectory: None,
        }
    }
}

pub(super) fn radius34(u: &[f64]) -> f64 {
    u[1].hypot(u[2])
}

/// Solves q(δ) = r on [0, δ_max] for increasing q with q(0) ≈ 0.
fn invert<F: FnMut(f64) -> Result<f64>>(mut q: F, r: f64, delta_max: f64) -> Result<f64> {
    brent_root(|d| Ok(q(d)? - r), 0.0, delta_max, 1e-10 * delta_max, 100)
}

/// Largest δ ≤ cap with dist(base + δ e₁, base) ≤ target for both signs.
pub(super) fn metric_delta(section: &TransverseSection, target: f64, cap: f64) -> Result<f64> {
    let off = |d: f64| -> Result<f64> {
        let a = distance(&section.point(&[d, 0.0, 0.0])?, &section.base)?;
        let b = distance(&section.point(&[-d, 0.0, 0.0])?, &section.base)?;
        Ok(a.max(b) - target)
    };
    if off(cap)? <= 0.0 {
        return Ok(cap);
    }
    brent_root(off, 0.0, cap, 1e-12 * cap, 200)
}

pub(super) fn log_grid(hi: f64, span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| hi * (-span * (1.0 - i as f64 / (n - 1) as f64)).exp()).collect()
}

fn orbit_samples(sys: &XStarSystem, x: &ManifoldPoint, t0: f64, t1: f64, dt: f64, cfg: &IntegratorConfig) -> Result<Vec<(f64, ManifoldPoint)>> {
    let n = ((t1 - t0) / dt).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
    let pts = sample_times(&sys.field, x, &times, cfg)?;
    Ok(times.into_iter().zip(pts).collect())
}

fn hit_trajectory(sys: &XStarSystem, seed: &ManifoldPoint, hits: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    trajectory(&sys.field, seed, hits[0] - 1.0, hits[hits.len() - 1] + 1.0, 0.05, cfg)
}

/// Four-balls search: an orbit through B(m₁, z_q), B(m₁, y_q), B(m₁, y_p), B(m₁, z_p)
/// in this order. Rows (r_p) are prefiltered by the forward hit of B(m₁, z_p),
/// which in the linear region around p* depends on the (x₃, x₄) block only.
pub fn four_balls_search(
    sys: &XStarSystem,
    sections: &LocalSections,
    chain: &BallChain,
    opts: &BallSearchOptions,
    cfg: &IntegratorConfig,
) -> Result<BallSearchReport> {
    opts.validate()?;
    if chain.balls.len() != 4 {
        return Err(Error::InvalidArgument("four-balls search needs the chain z_q, y_q, y_p, z_p".into()));
    }
    let z_p = &chain.balls[3];
    let dq_max = metric_delta(&sections.s_q, 0.5 * chain.balls[1].1, opts.delta_max)?;
    let dp_max = metric_delta(&sections.s_p, 0.5 * chain.balls[2].1, opts.delta_max)?;
    let outer = radius34(&sections.s_p.coords(&z_p.0)?).max(radius34(&sections.s_q.coords(&chain.balls[0].0)?)).max(1e-3);
    let mut report = BallSearchReport::empty(opts.budget);
    for (sq, sp) in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
        let q_p = |d: f64| -> Result<f64> { Ok(radius34(&sections.forward(sys, &[sq as f64 * d, 0.0, 0.0], cfg)?)) };
        let Ok(rp_hi) = q_p(dq_max) else { continue };
        let horizon_for = |r_lo: f64| (outer / r_lo).ln().max(0.0) / opts.rate_floor + 10.0;
        for r_p in log_grid(rp_hi, opts.log_span, opts.grid) {
            let Ok(dq) = invert(q_p, r_p, dq_max) else { continue };
            let Ok(u0) = sections.forward(sys, &[sq as f64 * dq, 0.0, 0.0], cfg) else { continue };
            report.rows_evaluated += 1;
            let x0 = sections.s_p.point(&u0)?;
            let h = horizon_for(r_p);
            let fwd = orbit_samples(sys, &x0, 0.0, h, opts.dt, cfg)?;
            if !fwd.iter().any(|(_, x)| distance(x, &z_p.0).map(|d| d < z_p.1).unwrap_or(false)) {
                continue;
            }
            let q_q = |d: f64| -> Result<f64> {
                let mut u = u0.clone();
                u[0] += sp as f64 * d;
                Ok(radius34(&sections.backward(sys, &u, cfg)?))
            };
            let Ok(rq_hi) = q_q(dp_max) else { continue };
            for r_q in log_grid(rq_hi, opts.log_span, opts.grid) {
                if report.seeds_evaluated >= opts.budget {
                    return Ok(report);
                }
                let Ok(dp) = invert(q_q, r_q, dp_max) else { continue };
                report.seeds_evaluated += 1;
                let mut u = u0.clone();
                u[0] += sp as f64 * dp;
                let seed = sections.s_p.point(&u)?;
                let hb = horizon_for(r_q) + sections.transit;
                let samples = orbit_samples(sys, &seed, -hb, h, opts.dt, cfg)?;
                if let Some(hits) = ordered_hits(&samples, chain) {
                    report.found = true;
                    report.trajectory = Some(hit_trajectory(sys, &seed, &hits, cfg)?);
                    report.seed = Some(seed);
                    report.r_p = Some(r_p);
                    report.r_q = Some(r_q);
                    report.orientation = Some((sq, sp));
                    report.hit_times = hits;
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

/// Three-balls search: seeds y_p + δ e_p on l_p ⊂ W^s(p*); an orbit through
/// B(m₁, z_q), B(m₁, y_q), B(m₁, y_p) whose forward orbit enters B(10⁻³, p*)
/// within time 50 and stays there.
pub fn three_balls_search(
    sys: &XStarSystem,
    sections: &LocalSections,
    chain: &BallChain,
    opts: &BallSearchOptions,
    cfg: &IntegratorConfig,
) -> Result<BallSearchReport> {
    opts.validate()?;
    if chain.balls.len() != 3 {
        return Err(Error::InvalidArgument("three-balls search needs the chain z_q, y_q, y_p".into()));
    }
    let dp_max = metric_delta(&sections.s_p, 0.5 * chain.balls[2].1, opts.delta_max)?;
    let outer = radius34(&sections.s_q.coords(&chain.balls[0].0)?).max(1e-3);
    let mut report = BallSearchReport::empty(opts.budget);
    for sp in [1i8, -1] {
        let q_q = |d: f64| -> Result<f64> { Ok(radius34(&sections.backward(sys, &[sp as f64 * d, 0.0, 0.0], cfg)?)) };
        let Ok(rq_hi) = q_q(dp_max) else { continue };
        report.rows_evaluated += 1;
        for r_q in log_grid(rq_hi, opts.log_span, opts.grid) {
            if report.seeds_evaluated >= opts.budget {
                return Ok(report);
            }
            let Ok(dp) = invert(q_q, r_q, dp_max) else { continue };
            report.seeds_evaluated += 1;
            let seed = sections.s_p.point(&[sp as f64 * dp, 0.0, 0.0])?;
            let hb = (outer / r_q).ln().max(0.0) / opts.rate_floor + 10.0 + sections.transit;
            let samples = orbit_samples(sys, &seed, -hb, 50.0, opts.dt, cfg)?;
            let Some(hits) = ordered_hits(&samples, chain) else { continue };
            let near = |x: &ManifoldPoint| distance(x, &sys.p_star).map(|d| d < 1e-3).unwrap_or(false);
            let after: Vec<&(f64, ManifoldPoint)> = samples.iter().filter(|(t, _)| *t >= hits[2]).collect();
            let Some(k) = after.iter().position(|(_, x)| near(x)) else { continue };
            if !after[k..].iter().all(|(_, x)| near(x)) {
                continue;
            }
            report.found = true;
            report.ws_entry_time = Some(after[k].0);
            report.trajectory = Some(hit_trajectory(sys, &seed, &hits, cfg)?);
            report.seed = Some(seed);
            report.r_q = Some(r_q);
            report.orientation = Some((0, sp));
            report.hit_times = hits;
            return Ok(report);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Chart, Space};

    fn pt(x: f64) -> ManifoldPoint {
        ManifoldPoint::new(Space::Euclidean(1), Chart::Flat, vec![x]).unwrap()
    }

    #[test]
    fn greedy_hits_are_ordered() {
        let samples: Vec<(f64, ManifoldPoint)> = [0.0, 1.0, 2.0, 1.0, 0.0, 3.0].iter().enumerate().map(|(i, &x)| (i as f64, pt(x))).collect();
        let chain = BallChain::new(vec![(pt(2.0), 0.1), (pt(0.0), 0.1), (pt(3.0), 0.1)]).unwrap();
        assert_eq!(ordered_hits(&samples, &chain), Some(vec![2.0, 4.0, 5.0]));
        let chain = BallChain::new(vec![(pt(3.0), 0.1), (pt(0.0), 0.1)]).unwrap();
        assert_eq!(ordered_hits(&samples, &chain), None);
        // the same sample cannot serve two balls
        let chain = BallChain::new(vec![(pt(0.0), 5.0), (pt(0.0), 5.0)]).unwrap();
        assert_eq!(ordered_hits(&samples, &chain), Some(vec![0.0, 1.0]));
    }

    #[test]
    fn log_grid_spans() {
        let g = log_grid(1.0, 2.0, 5);
        assert!((g[0] - (-2.0f64).exp()).abs() < 1e-15 && g[4] == 1.0);
    }
}
