//! The heteroclinic orbit α of X* through the seam point (0, 0, 0, 0), and
//! local coordinates near p* and q*.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{section_crossing, Direction, TransverseSection};
use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::fields::XStarSystem;
use crate::integrator::{flow_with, Control, IntegratorConfig};
use crate::manifold::{distance, wrap_angle, wrap_pm, Chart, ManifoldPoint, Space, SphereChart};
use crate::optim::brent_root;
use crate::trajectory::{trajectory, Trajectory};

fn local_in(x: &ManifoldPoint, pole: SphereChart, shift: f64) -> Result<[f64; 4]> {
    let y = x.to_chart(Chart::Pair(pole, SphereChart::Band))?;
    Ok([y.coords[0], y.coords[1], y.coords[2], wrap_pm(y.coords[3] - shift)])
}

/// (ξ, η, x₃, x₄) near p*: north chart on M₁, offset (r₂, φ₂) from u₂ on M₂.
pub fn p_local(x: &ManifoldPoint) -> Result<[f64; 4]> {
    local_in(x, SphereChart::North, 0.0)
}

/// (ξ, η, y₃, y₄) near q*: south chart on M₁, offset (r₂, φ₂ − c) on M₂.
pub fn q_local(sys: &XStarSystem, x: &ManifoldPoint) -> Result<[f64; 4]> {
    local_in(x, SphereChart::South, sys.params.g1_pole_value)
}

pub fn from_p_local(c: [f64; 4]) -> Result<ManifoldPoint> {
    ManifoldPoint::new(Space::SpherePair, Chart::Pair(SphereChart::North, SphereChart::Band), c.to_vec())
}

pub fn from_q_local(sys: &XStarSystem, c: [f64; 4]) -> Result<ManifoldPoint> {
    ManifoldPoint::new(
        Space::SpherePair,
        Chart::Pair(SphereChart::South, SphereChart::Band),
        vec![c[0], c[1], c[2], wrap_angle(c[3] + sys.params.g1_pole_value)],
    )
}

/// First time (signed) the orbit of x enters the open ball B(radius, target).
pub fn ball_entry_time(
    field: &VectorFieldDef,
    x: &ManifoldPoint,
    target: &ManifoldPoint,
    radius: f64,
    direction: Direction,
    cap: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let gap = |p: &ManifoldPoint| distance(p, target).map(|d| d - radius);
    if gap(x)? < 0.0 {
        return Ok(0.0);
    }
    let mut hit = None;
    flow_with(field, x, direction.sign() * cap, cfg, |step| {
        if gap(&step.end_point()?)? < 0.0 {
            let t = brent_root(|t| gap(&step.point_at(t)?), step.t0, step.t1, 1e-12, 200)?;
            hit = Some(t);
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;
    hit.ok_or_else(|| Error::RootFinding(format!("orbit does not enter the {radius} ball within time {cap}")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaData {
    /// α sampled on [t_minus, t_plus] with α(0) = (0, 0, 0, 0).
    pub trajectory: Trajectory,
    pub origin: ManifoldPoint,
    /// Entry time into B(10⁻³, q*) going backward.
    pub t_minus: f64,
    /// Entry time into B(10⁻³, p*) going forward.
    pub t_plus: f64,
    /// |X⁺ − X⁻| at α(0).
    pub seam_residual: f64,
    /// Unit tangents at α(0) in seam coordinates (φ₁, r₂, φ₂), in the order
    /// l, W^s(p*) ∩ seam, f(l), W^u(q*) ∩ seam. The manifold rows are measured
    /// by flowing local manifold points to the seam.
    pub tangents: [[f64; 3]; 4],
    /// Singular values of the stacked tangent matrix, descending.
    pub singular_values: [f64; 3],
}

impl AlphaData {
    /// α(t), integrated from α(0).
    pub fn point_at(&self, field: &VectorFieldDef, t: f64, cfg: &IntegratorConfig) -> Result<ManifoldPoint> {
        crate::integrator::integrate(field, &self.origin, t, cfg)
    }
}

/// The seam {r₁ = 0} as a section with coordinates (φ₁, r₂, φ₂).
pub fn seam_section(sys: &XStarSystem) -> Result<TransverseSection> {
    let origin = ManifoldPoint::pair_band(0.0, 0.0, 0.0, 0.0)?;
    let e = |k: usize| (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    TransverseSection::with_frame(&sys.field, origin, &e(0), vec![e(1), e(2), e(3)], 3.0)
}

fn unit3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Tangent at θ = 0 of the seam trace of the curve θ ↦ start(θ) flowed to the seam
/// (central differences with one Richardson step, tight tolerances).
fn seam_trace_tangent<F: Fn(f64) -> Result<ManifoldPoint>>(sys: &XStarSystem, seam: &TransverseSection, start: F, dir: Direction) -> Result<[f64; 3]> {
    let cfg = IntegratorConfig { h_max: 0.05, ..IntegratorConfig::with_tol(1e-13) };
    let hit = |th: f64| -> Result<Vec<f64>> { Ok(section_crossing(&sys.field, seam, &start(th)?, dir, 60.0, 0.0, &cfg)?.u) };
    let central = |h: f64| -> Result<[f64; 3]> {
        let a = hit(h)?;
        let b = hit(-h)?;
        Ok([wrap_pm(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h), wrap_pm(a[2] - b[2]) / (2.0 * h)])
    };
    let h = 2e-3;
    let d1 = central(h)?;
    let d2 = central(h / 2.0)?;
    Ok(unit3([0, 1, 2].map(|i| (4.0 * d2[i] - d1[i]) / 3.0)))
}

pub fn find_alpha(sys: &XStarSystem, cfg: &IntegratorConfig) -> Result<AlphaData> {
    let field = &sys.field;
    let origin = ManifoldPoint::pair_band(0.0, 0.0, 0.0, 0.0)?;
    let plus = sys.xplus(&origin)?;
    let minus = sys.xminus(&origin)?;
    let seam_residual = plus.iter().zip(&minus).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let t_plus = ball_entry_time(field, &origin, &sys.p_star, 1e-3, Direction::Forward, 100.0, cfg)
        .map_err(|e| Error::RootFinding(format!("alpha does not approach p*: {e}")))?;
    let t_minus = ball_entry_time(field, &origin, &sys.q_star, 1e-3, Direction::Backward, 100.0, cfg)
        .map_err(|e| Error::RootFinding(format!("alpha does not approach q*: {e}")))?;
    let traj = trajectory(field, &origin, t_minus, t_plus, 0.05, cfg)?;

    let seam = seam_section(sys)?;
    let rho = 0.01;
    let c = sys.params.g1_pole_value;
    let t_ws = seam_trace_tangent(sys, &seam, |th| from_p_local([rho * th.cos(), rho * th.sin(), 0.0, 0.0]), Direction::Backward)?;
    let t_wu = seam_trace_tangent(
        sys,
        &seam,
        |th| ManifoldPoint::new(Space::SpherePair, Chart::Pair(SphereChart::South, SphereChart::Band), vec![rho * th.cos(), rho * th.sin(), 0.0, c]),
        Direction::Forward,
    )?;
    let fl = sys.fl_tangent()?;
    let t_l = [1.0, 0.0, 0.0];
    let t_fl = unit3([fl[1], fl[2], fl[3]]);
    let tangents = [t_l, t_ws, t_fl, t_wu];
    let m = DMatrix::from_fn(4, 3, |i, j| tangents[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(AlphaData {
        trajectory: traj,
        origin,
        t_minus,
        t_plus,
        seam_residual,
        tangents,
        singular_values: [sv[0], sv[1], sv[2]],
    })
}
