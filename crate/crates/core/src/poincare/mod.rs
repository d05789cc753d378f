//! Transverse sections, first-hit maps, and the trajectory searches near the
//! heteroclinic orbit α of X*.

mod alpha;
mod balls;
mod phase;
mod polar;

pub use alpha::{ball_entry_time, find_alpha, from_p_local, from_q_local, p_local, q_local, seam_section, AlphaData};
pub use balls::{
    four_balls_search, ordered_hits, three_balls_search, BallChain, BallSearchOptions, BallSearchReport, LocalSections,
};
pub use phase::{exit_angle, phase_matched_seed, PhaseSeed};
pub use polar::{polar_rate_check, PolarRateReport, RateStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::integrator::{flow_with, Control, IntegratorConfig};
use crate::manifold::{chart_difference, point_from_chart, ManifoldPoint};
use crate::optim::brent_root;

/// Grazing threshold on the normal velocity at a crossing.
pub const GRAZING: f64 = 1e-6;

/// Codimension-1 disk through `base`, flat in the chart of `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransverseSection {
    pub base: ManifoldPoint,
    /// Unit normal in chart coordinates.
    pub normal: Vec<f64>,
    /// Orthonormal basis of the disk's tangent space; section coordinates are
    /// the components along these vectors.
    pub frame: Vec<Vec<f64>>,
    pub radius: f64,
    /// +1 if the field crosses along +normal, −1 otherwise.
    pub side: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = dot(v, v).sqrt();
    if !(n > 1e-14) {
        return Err(Error::InvalidArgument("zero vector".into()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

impl TransverseSection {
    /// Section with the frame completed from the coordinate axes by Gram–Schmidt.
    pub fn new(field: &VectorFieldDef, base: ManifoldPoint, normal: &[f64], radius: f64) -> Result<Self> {
        let n = normalize(normal)?;
        let dim = base.dim();
        let mut frame: Vec<Vec<f64>> = Vec::new();
        for k in 0..dim {
            if frame.len() == dim - 1 {
                break;
            }
            let mut v: Vec<f64> = (0..dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            for b in std::iter::once(&n).chain(frame.iter()) {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            if dot(&v, &v).sqrt() > 1e-8 {
                frame.push(normalize(&v)?);
            }
        }
        Self::with_frame(field, base, &n, frame, radius)
    }

    pub fn with_frame(field: &VectorFieldDef, base: ManifoldPoint, normal: &[f64], frame: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        if base.space != field.space {
            return Err(Error::SpaceMismatch(base.space.id(), field.space.id()));
        }
        let dim = base.dim();
        if normal.len() != dim || frame.len() + 1 != dim || frame.iter().any(|f| f.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: normal.len() });
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("section radius must be positive, got {radius}")));
        }
        let normal = normalize(normal)?;
        for (i, a) in std::iter::once(&normal).chain(frame.iter()).enumerate() {
            for (j, b) in std::iter::once(&normal).chain(frame.iter()).enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(a, b) - want).abs() > 1e-10 {
                    return Err(Error::InvalidArgument("normal and frame must be orthonormal".into()));
                }
            }
        }
        let vn = dot(&field.evaluate(&base)?, &normal);
        if vn.abs() <= GRAZING {
            return Err(Error::InvalidArgument(format!("field is tangent to the section at its base (normal velocity {vn:e})")));
        }
        let sec = TransverseSection { side: vn.signum(), base, normal, frame, radius };
        // transversality on the rim and halfway
        for k in 0..sec.frame.len() {
            for &s in &[-1.0, -0.5, 0.5, 1.0] {
                let mut u = vec![0.0; sec.frame.len()];
                u[k] = s * sec.radius;
                if let Ok(p) = sec.point(&u) {
                    if let Ok(v) = field.evaluate(&p) {
                        if dot(&v, &sec.normal) * sec.side <= GRAZING {
                            return Err(Error::InvalidArgument(format!("section is not transverse at {u:?}")));
                        }
                    }
                }
            }
        }
        Ok(sec)
    }

    /// Offset of x from the base in the base chart, angles wrapped.
    fn offset(&self, x: &ManifoldPoint) -> Option<Vec<f64>> {
        let y = x.to_chart(self.base.chart).ok()?;
        Some(chart_difference(self.base.chart, &y.coords, &self.base.coords))
    }

    /// Signed normal coordinate ⟨x − base, n⟩, None outside the base chart.
    pub fn normal_coord(&self, x: &ManifoldPoint) -> Option<f64> {
        self.offset(x).map(|d| dot(&d, &self.normal))
    }

    /// Section coordinates of a point (its projection onto the frame).
    pub fn coords(&self, x: &ManifoldPoint) -> Result<Vec<f64>> {
        let d = self.offset(x).ok_or_else(|| Error::OutsideChart { chart: self.base.chart.name(), coords: x.coords.clone() })?;
        Ok(self.frame.iter().map(|f| dot(&d, f)).collect())
    }

    pub fn point(&self, u: &[f64]) -> Result<ManifoldPoint> {
        if u.len() != self.frame.len() {
            return Err(Error::Dimension { expected: self.frame.len(), got: u.len() });
        }
        let mut c = self.base.coords.clone();
        for (f, &a) in self.frame.iter().zip(u) {
            c.iter_mut().zip(f).for_each(|(x, y)| *x += a * y);
        }
        point_from_chart(self.base.space, self.base.chart, c)
    }

    pub fn in_disk(&self, u: &[f64]) -> bool {
        dot(u, u).sqrt() <= self.radius
    }

    /// Normal component of the field at x, in the base chart.
    pub fn normal_velocity(&self, field: &VectorFieldDef, x: &ManifoldPoint) -> Result<f64> {
        let y = x.to_chart(self.base.chart)?;
        Ok(dot(&field.evaluate(&y)?, &self.normal))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Signed flow time from the start point.
    pub t: f64,
    pub point: ManifoldPoint,
    /// Section coordinates of the hit.
    pub u: Vec<f64>,
}

/// First hit of the section disk along the orbit of x with |t| > min_time and |t| ≤ cap.
pub fn section_crossing(
    field: &VectorFieldDef,
    section: &TransverseSection,
    x: &ManifoldPoint,
    direction: Direction,
    cap: f64,
    min_time: f64,
    cfg: &IntegratorConfig,
) -> Result<Crossing> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument("crossing cap must be positive".into()));
    }
    let mut found: Option<Result<Crossing>> = None;
    let mut prev: Option<f64> = section.normal_coord(x);
    flow_with(field, x, direction.sign() * cap, cfg, |step| {
        let s1 = step.end_point().ok().and_then(|p| section.normal_coord(&p));
        let s0 = prev;
        prev = s1;
        let (Some(a), Some(b)) = (s0, s1) else { return Ok(Control::Continue) };
        let change = (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0);
        if !change || step.t1.abs() <= min_time {
            return Ok(Control::Continue);
        }
        let s_at = |t: f64| -> Result<f64> {
            let p = step.point_at(t)?;
            section.normal_coord(&p).ok_or_else(|| Error::RootFinding("crossing left the section chart".into()))
        };
        let t = if b == 0.0 { step.t1 } else { brent_root(s_at, step.t0, step.t1, 1e-13, 200)? };
        if t.abs() <= min_time {
            return Ok(Control::Continue);
        }
        let p = step.point_at(t)?;
        // a sign flip from angle wrapping is not a crossing
        if section.normal_coord(&p).is_none_or(|s| s.abs() > 1e-6) {
            return Ok(Control::Continue);
        }
        let u = section.coords(&p)?;
        if !section.in_disk(&u) {
            return Ok(Control::Continue);
        }
        let vn = section.normal_velocity(field, &p)?;
        found = Some(if vn.abs() <= GRAZING {
            Err(Error::Grazing { t, vn })
        } else {
            Ok(Crossing { t, point: p, u })
        });
        Ok(Control::Stop)
    })?;
    found.unwrap_or(Err(Error::NoCrossing { cap }))
}

/// First-hit map from `from` to `to`, in section coordinates.
pub fn poincare_map(
    field: &VectorFieldDef,
    from: &TransverseSection,
    to: &TransverseSection,
    u: &[f64],
    direction: Direction,
    cap: f64,
    cfg: &IntegratorConfig,
) -> Result<Crossing> {
    let x = from.point(u)?;
    let min_time = if from == to { 1e-6 } else { 0.0 };
    section_crossing(field, to, &x, direction, cap, min_time, cfg)
}
