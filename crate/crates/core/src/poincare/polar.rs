//! Polar rates of the (x₃, x₄) block near p* along an orbit.

use serde::{Deserialize, Serialize};

use super::alpha::p_local;
use crate::error::{Error, Result};
use crate::fields::{XStarSystem, X2_LINEAR_RADIUS};
use crate::integrator::{flow_with, Control, IntegratorConfig};
use crate::manifold::{Chart, ManifoldPoint, SphereChart};

/// Outer radius of the X₂ blend around u₂.
const BLEND_OUTER: f64 = 0.4;
/// M₁ pole radius inside which the M₂ weight of X⁺ is 1.
const M1_RADIUS: f64 = 0.25;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub samples: usize,
    pub dlogr_min: f64,
    pub dlogr_max: f64,
    pub dphi_min: f64,
    pub dphi_max: f64,
}

impl RateStats {
    fn push(&mut self, dlogr: f64, dphi: f64) {
        if self.samples == 0 {
            *self = RateStats { samples: 1, dlogr_min: dlogr, dlogr_max: dlogr, dphi_min: dphi, dphi_max: dphi };
            return;
        }
        self.samples += 1;
        self.dlogr_min = self.dlogr_min.min(dlogr);
        self.dlogr_max = self.dlogr_max.max(dlogr);
        self.dphi_min = self.dphi_min.min(dphi);
        self.dphi_max = self.dphi_max.max(dphi);
    }

    /// Largest deviation of either rate from `target`.
    pub fn max_deviation(&self, target: f64) -> f64 {
        [self.dlogr_min, self.dlogr_max, self.dphi_min, self.dphi_max].iter().map(|v| (v - target).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarRateReport {
    /// Samples with r ≤ 0.2 (X₂ exactly linear).
    pub linear: RateStats,
    /// Samples with 0.2 < r < 0.4.
    pub blend: RateStats,
    /// Time at which the orbit left the neighborhood (or the horizon).
    pub exit_time: f64,
}

/// d(log r)/dt and dφ/dt of (x₃, x₄) = (r₂, φ₂) computed from field values.
fn rates(sys: &XStarSystem, x: &ManifoldPoint) -> Result<Option<(f64, f64, f64)>> {
    let l = p_local(x)?;
    if l[0].hypot(l[1]) > M1_RADIUS {
        return Ok(None);
    }
    let y = x.to_chart(Chart::Pair(SphereChart::North, SphereChart::Band))?;
    let v = sys.field.evaluate(&y)?;
    let (x3, x4) = (l[2], l[3]);
    let r2 = x3 * x3 + x4 * x4;
    if !(r2 > 0.0) {
        return Err(Error::InvalidArgument("polar radius underflow".into()));
    }
    Ok(Some(((x3 * v[2] + x4 * v[3]) / r2, (x3 * v[3] - x4 * v[2]) / r2, r2.sqrt())))
}

/// Samples the rates along the forward orbit of x (4 points per integrator step)
/// until it leaves {ρ₁ ≤ 0.25, r < 0.4} or the horizon ends.
pub fn polar_rate_check(sys: &XStarSystem, x: &ManifoldPoint, horizon: f64, cfg: &IntegratorConfig) -> Result<PolarRateReport> {
    let mut report = PolarRateReport::default();
    let record = |rep: &mut PolarRateReport, p: &ManifoldPoint| -> Result<bool> {
        match rates(sys, p)? {
            Some((dl, dp, r)) if r < BLEND_OUTER => {
                if r <= X2_LINEAR_RADIUS {
                    rep.linear.push(dl, dp);
                } else {
                    rep.blend.push(dl, dp);
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    };
    if !record(&mut report, x)? {
        return Err(Error::InvalidArgument("start point is not in the polar chart around p*".into()));
    }
    let mut exit = horizon;
    flow_with(&sys.field, x, horizon, cfg, |step| {
        for k in 1..=4 {
            let t = step.t0 + (step.t1 - step.t0) * k as f64 / 4.0;
            if !record(&mut report, &step.point_at(t)?)? {
                exit = t;
                return Ok(Control::Stop);
            }
        }
        Ok(Control::Continue)
    })?;
    report.exit_time = exit;
    Ok(report)
}
