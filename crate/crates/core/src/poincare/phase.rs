//! Seeds on L_p whose orbit follows given points x_q (backward) and x_p
//! (forward) near the saddles. Near p* and q* the (x₃, x₄) block is a linear
//! spiral, so two orbits trace nearby curves once they leave the circle of
//! radius r₀ at the same angle.

use serde::{Deserialize, Serialize};

use super::alpha::{p_local, q_local};
use super::balls::{log_grid, radius34};
use super::{BallSearchOptions, Direction, LocalSections};
use crate::error::{Error, Result};
use crate::fields::XStarSystem;
use crate::integrator::{flow_with, Control, IntegratorConfig};
use crate::manifold::{wrap_pm, ManifoldPoint};
use crate::optim::brent_root;

/// Angle of the (x₃, x₄) block when the orbit of x leaves the disk of radius
/// r0 (in local coordinates around the saddle read by `local`), counting only
/// exits after the orbit has been inside the disk.
pub fn exit_angle<L: Fn(&ManifoldPoint) -> Result<[f64; 4]>>(
    sys: &XStarSystem,
    x: &ManifoldPoint,
    local: L,
    r0: f64,
    direction: Direction,
    cap: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let gap = |p: &ManifoldPoint| local(p).map(|l| l[2].hypot(l[3]) - r0);
    let angle = |p: &ManifoldPoint| local(p).map(|l| l[3].atan2(l[2]));
    let mut inside = gap(x)? < 0.0;
    let mut out = None;
    flow_with(&sys.field, x, direction.sign() * cap, cfg, |step| {
        let g1 = gap(&step.end_point()?)?;
        if !inside {
            inside = g1 < 0.0;
            return Ok(Control::Continue);
        }
        if g1 >= 0.0 {
            let t = brent_root(|t| gap(&step.point_at(t)?), step.t0, step.t1, 1e-13, 200)?;
            out = Some(angle(&step.point_at(t)?)?);
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;
    out.ok_or_else(|| Error::RootFinding(format!("orbit does not leave the radius-{r0} disk within time {cap}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeed {
    pub seed: ManifoldPoint,
    pub delta_q: f64,
    pub delta_p: f64,
    pub orientation: (i8, i8),
    /// Exit-angle mismatches (forward near p*, backward near q*).
    pub residuals: (f64, f64),
}

/// Zeros of the wrapped angle mismatch along an increasing grid of δ,
/// skipping 2π wraps.
fn phase_roots<F: FnMut(f64) -> Result<f64>>(mut mismatch: F, grid: &[f64]) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &d in grid {
        let Ok(m) = mismatch(d) else {
            prev = None;
            continue;
        };
        if let Some((d0, m0)) = prev {
            if m0 * m <= 0.0 && (m0 - m).abs() < std::f64::consts::PI {
                if let Ok(r) = brent_root(&mut mismatch, d0, d, 1e-14 * d, 200) {
                    roots.push(r);
                }
            }
        }
        prev = Some((d, m));
    }
    roots
}

/// δ at which `radius(δ)` reaches `target`, from the slope at a small δ.
fn radius_match<F: FnMut(f64) -> Result<f64>>(mut radius: F, target: f64, probe: f64) -> Result<f64> {
    let gain = radius(probe)? / probe;
    if !(gain > 0.0) || !(target > 0.0) {
        return Err(Error::RootFinding(format!("cannot match radius {target} (gain {gain})")));
    }
    Ok(target / gain)
}

/// Seed F(y_q + δ_q e_q) + δ_p e_p on S_p whose orbit leaves the r0-disk near
/// p* (forward) at the exit angle of x_p and the r0-disk near q* (backward)
/// at the exit angle of x_q. Among the solutions, which repeat every factor
/// e^{2π} in δ, the one whose unstable radius is closest to that of x_p
/// (resp. x_q) is taken, so the orbit also lingers near the saddles for about
/// as long as the pseudotrajectory. r0 must not exceed the linear radius.
pub fn phase_matched_seed(
    sys: &XStarSystem,
    sections: &LocalSections,
    x_q: &ManifoldPoint,
    x_p: &ManifoldPoint,
    r0: f64,
    opts: &BallSearchOptions,
    cfg: &IntegratorConfig,
) -> Result<PhaseSeed> {
    opts.validate()?;
    let cap = 60.0;
    let local_q = |p: &ManifoldPoint| q_local(sys, p);
    let fwd = |x: &ManifoldPoint| exit_angle(sys, x, p_local, r0, Direction::Forward, cap, cfg);
    let bwd = |x: &ManifoldPoint| exit_angle(sys, x, local_q, r0, Direction::Backward, cap, cfg);
    let target_p = fwd(x_p)?;
    let target_q = bwd(x_q)?;
    let lp = p_local(x_p)?;
    let lq = q_local(sys, x_q)?;
    let half = 0.5 * opts.log_span.max(std::f64::consts::TAU) + 0.5;
    let window = |center: f64| -> Vec<f64> { log_grid(center * half.exp(), 2.0 * half, opts.grid) };
    let nearest = |roots: Vec<f64>, center: f64| roots.into_iter().min_by(|a, b| (a / center).ln().abs().total_cmp(&(b / center).ln().abs()));

    let mut best_q: Option<(f64, i8, f64)> = None;
    for sq in [1i8, -1] {
        let image = |d: f64| sections.forward(sys, &[sq as f64 * d, 0.0, 0.0], cfg);
        let Ok(center) = radius_match(|d| Ok(radius34(&image(d)?)), lp[2].hypot(lp[3]), 1e-7) else { continue };
        let roots = phase_roots(|d| Ok(wrap_pm(fwd(&sections.s_p.point(&image(d)?)?)? - target_p)), &window(center));
        if let Some(d) = nearest(roots, center) {
            let score = (d / center).ln().abs();
            if best_q.is_none_or(|b| score < b.2) {
                best_q = Some((d, sq, score));
            }
        }
    }
    let Some((dq, sq, _)) = best_q else {
        return Err(Error::RootFinding("no forward phase match on either half-surface".into()));
    };
    let u0 = sections.forward(sys, &[sq as f64 * dq, 0.0, 0.0], cfg)?;

    let mut best_p: Option<(f64, i8, f64)> = None;
    for sp in [1i8, -1] {
        let shifted = |d: f64| {
            let mut u = u0.clone();
            u[0] += sp as f64 * d;
            u
        };
        let at = |d: f64| sections.s_p.point(&shifted(d));
        let Ok(center) = radius_match(|d| Ok(radius34(&sections.backward(sys, &shifted(d), cfg)?)), lq[2].hypot(lq[3]), 1e-7) else { continue };
        let roots = phase_roots(|d| Ok(wrap_pm(bwd(&at(d)?)? - target_q)), &window(center));
        if let Some(d) = nearest(roots, center) {
            let score = (d / center).ln().abs();
            if best_p.is_none_or(|b| score < b.2) {
                best_p = Some((d, sp, score));
            }
        }
    }
    let Some((dp, sp, _)) = best_p else {
        return Err(Error::RootFinding("no backward phase match on either half-surface".into()));
    };
    let mut u = u0;
    u[0] += sp as f64 * dp;
    let seed = sections.s_p.point(&u)?;
    let residuals = (wrap_pm(fwd(&seed)? - target_p), wrap_pm(bwd(&seed)? - target_q));
    Ok(PhaseSeed { seed, delta_q: dq, delta_p: dp, orientation: (sq, sp), residuals })
}
