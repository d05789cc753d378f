//! Dormand–Prince 5(4) with dense output and chart switching. Fields are
//! autonomous, so the stage times never enter.
//!
//! Each accepted step lives in a single chart; charts are switched between
//! steps (band <-> pole with hysteresis). A stage that leaves its chart makes
//! the step fail and the step size shrink.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::manifold::{sphere, wrap_angle, Chart, ManifoldPoint, Space, SphereChart};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Fixed step size; disables error control when set.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rtol: 1e-9, atol: 1e-9, h_max: 0.1, h_min: 1e-12, max_steps: 5_000_000, fixed_step: None }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorConfig { rtol: tol, atol: tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0 && self.atol > 0.0 && self.h_max > 0.0 && self.h_min > 0.0 && self.h_min < self.h_max;
        if !ok || self.fixed_step.is_some_and(|h| h.is_nan() || h <= 0.0) {
            return Err(Error::InvalidArgument(format!("bad integrator settings {self:?}")));
        }
        Ok(())
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension. Times are relative to
/// the start of the integration and `t1 − t0` carries the direction.
pub struct Step<'a> {
    pub t0: f64,
    pub t1: f64,
    pub chart: Chart,
    pub space: Space,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    rcont: &'a [Vec<f64>; 5],
}

impl Step<'_> {
    /// Dense-output coordinates at t ∈ [t0, t1] (unwrapped angles).
    pub fn coords_at(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let th = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - th;
        let r = self.rcont;
        for i in 0..out.len() {
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
    }

    pub fn point_at(&self, t: f64) -> Result<ManifoldPoint> {
        let mut c = vec![0.0; self.y0.len()];
        self.coords_at(t, &mut c);
        ManifoldPoint::new(self.space, self.chart, c)
    }

    pub fn end_point(&self) -> Result<ManifoldPoint> {
        ManifoldPoint::new(self.space, self.chart, self.y1.to_vec())
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.t0 <= self.t1 { (self.t0, self.t1) } else { (self.t1, self.t0) };
        t >= a && t <= b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct FlowEnd {
    /// Relative time reached.
    pub t: f64,
    pub point: ManifoldPoint,
    /// True if the observer stopped the integration early.
    pub stopped: bool,
}

/// Moves each sphere factor into the chart the integrator prefers.
fn switch_charts(space: Space, chart: Chart, y: &mut [f64]) -> Option<Chart> {
    let factors = chart.factors();
    if factors.is_empty() {
        return None;
    }
    let mut new = factors.clone();
    let mut changed = false;
    for (k, f) in factors.iter().enumerate() {
        if let Some((nc, c)) = sphere::switch(*f, [y[2 * k], y[2 * k + 1]]) {
            new[k] = nc;
            y[2 * k] = c[0];
            y[2 * k + 1] = c[1];
            changed = true;
        }
    }
    if !changed {
        return None;
    }
    Some(match space {
        Space::Sphere => Chart::Sphere(new[0]),
        _ => Chart::Pair(new[0], new[1]),
    })
}

fn wrap_slots(chart: Chart, y: &mut [f64]) {
    for i in chart.angle_slots() {
        y[i] = wrap_angle(y[i]);
    }
}

fn starting_chart(x: &ManifoldPoint) -> (Chart, Vec<f64>) {
    let mut y = x.coords.clone();
    let mut chart = x.chart;
    // a pole chart far from its pole, or the band near a pole
    for _ in 0..2 {
        match switch_charts(x.space, chart, &mut y) {
            Some(c) => chart = c,
            None => break,
        }
    }
    if let Chart::Pair(..) | Chart::Sphere(_) = chart {
        for (k, f) in chart.factors().iter().enumerate() {
            if *f != SphereChart::Band && y[2 * k].hypot(y[2 * k + 1]) > 1.5 {
                // should not happen after switching; keep the original chart
                return (x.chart, x.coords.clone());
            }
        }
    }
    (chart, y)
}

/// Integrates for a signed duration, handing every accepted step to `on_step`.
pub fn flow_with<F>(field: &VectorFieldDef, x: &ManifoldPoint, duration: f64, cfg: &IntegratorConfig, mut on_step: F) -> Result<FlowEnd>
where
    F: FnMut(&Step) -> Result<Control>,
{
    if x.space != field.space {
        return Err(Error::SpaceMismatch(x.space.id(), field.space.id()));
    }
    if !duration.is_finite() {
        return Err(Error::InvalidArgument("non-finite integration time".into()));
    }
    if duration == 0.0 {
        return Ok(FlowEnd { t: 0.0, point: x.clone(), stopped: false });
    }
    let n = x.dim();
    let space = x.space;
    let dir = duration.signum();
    let (mut chart, mut y) = starting_chart(x);
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err_v = vec![0.0; n];
    field.eval_coords(chart, &y, &mut k[0])?;

    let fixed = cfg.fixed_step;
    let mut h = dir * fixed.unwrap_or(cfg.h_max.min(1e-2));
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut last_rejected = false;
    let t_eps = 1e-13 * duration.abs().max(1.0);

    while (duration - t) * dir > t_eps {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::TooManySteps { t });
        }
        if (t + h - duration) * dir > 0.0 {
            h = duration - t;
        }
        if fixed.is_none() && h.abs() < cfg.h_min {
            return Err(Error::StepUnderflow { t });
        }

        let stage_ok = (|| -> Result<()> {
            let (kk, rest) = k.split_at_mut(1);
            let k1 = &kk[0];
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            for i in 0..n {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            field.eval_coords(chart, &ys, k2)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            field.eval_coords(chart, &ys, k3)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            field.eval_coords(chart, &ys, k4)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            field.eval_coords(chart, &ys, k5)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            field.eval_coords(chart, &ys, k6)?;
            for i in 0..n {
                y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            field.eval_coords(chart, &y1, k7)?;
            Ok(())
        })();

        if let Err(e) = stage_ok {
            if fixed.is_some() {
                return Err(e);
            }
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        let err = if fixed.is_some() {
            0.0
        } else {
            let mut s = 0.0;
            for i in 0..n {
                err_v[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
                s += (err_v[i] / sc).powi(2);
            }
            (s / n as f64).sqrt()
        };

        if err <= 1.0 {
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k[6][i] - bspl;
                rcont[4][i] =
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let t_new = if (duration - (t + h)) * dir <= t_eps { duration } else { t + h };
            let ctl = {
                let step = Step { t0: t, t1: t_new, chart, space, y0: &y, y1: &y1, rcont: &rcont };
                on_step(&step)?
            };
            t = t_new;
            y.copy_from_slice(&y1);
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            if ctl == Control::Stop {
                let point = ManifoldPoint::new(space, chart, y.clone())?;
                return Ok(FlowEnd { t, point, stopped: true });
            }
            wrap_slots(chart, &mut y);
            if let Some(c) = switch_charts(space, chart, &mut y) {
                chart = c;
                field.eval_coords(chart, &y, &mut k[0])?;
            }
            if let Some(fh) = fixed {
                h = dir * fh;
            } else {
                let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = dir * (h.abs() * fac).min(cfg.h_max);
            }
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    let point = ManifoldPoint::new(space, chart, y)?;
    Ok(FlowEnd { t, point, stopped: false })
}

/// φ(t, x).
pub fn integrate(field: &VectorFieldDef, x: &ManifoldPoint, t: f64, cfg: &IntegratorConfig) -> Result<ManifoldPoint> {
    Ok(flow_with(field, x, t, cfg, |_| Ok(Control::Continue))?.point)
}

/// φ(t, x) at the given relative times, which must all have one sign and be
/// sorted by |t|. Returns the points in the same order.
pub fn sample_one_sided(field: &VectorFieldDef, x: &ManifoldPoint, times: &[f64], cfg: &IntegratorConfig) -> Result<Vec<ManifoldPoint>> {
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && times[idx] == 0.0 {
        out.push(x.clone());
        idx += 1;
    }
    if idx == times.len() {
        return Ok(out);
    }
    let last = *times.last().unwrap();
    flow_with(field, x, last, cfg, |step| {
        while idx < times.len() && step.contains(times[idx]) {
            out.push(step.point_at(times[idx])?);
            idx += 1;
        }
        Ok(if idx == times.len() { Control::Stop } else { Control::Continue })
    })?;
    while out.len() < times.len() {
        // only reachable through round-off at the final time
        out.push(integrate(field, x, times[out.len()], cfg)?);
    }
    Ok(out)
}

/// φ(t, x) for sorted times of either sign.
pub fn sample_times(field: &VectorFieldDef, x: &ManifoldPoint, times: &[f64], cfg: &IntegratorConfig) -> Result<Vec<ManifoldPoint>> {
    let split = times.partition_point(|&t| t < 0.0);
    let back: Vec<f64> = times[..split].iter().rev().copied().collect();
    let mut pts_back = sample_one_sided(field, x, &back, cfg)?;
    pts_back.reverse();
    let fwd = sample_one_sided(field, x, &times[split..], cfg)?;
    pts_back.extend(fwd);
    Ok(pts_back)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::distance;

    fn linear(a: [[f64; 2]; 2]) -> VectorFieldDef {
        VectorFieldDef::new("lin", Space::Euclidean(2), "", move |_, x, out| {
            out[0] = a[0][0] * x[0] + a[0][1] * x[1];
            out[1] = a[1][0] * x[0] + a[1][1] * x[1];
            Ok(())
        })
    }

    #[test]
    fn exponential_decay() {
        let f = VectorFieldDef::new("decay", Space::Euclidean(1), "", |_, x, out| {
            out[0] = -x[0];
            Ok(())
        });
        let x = ManifoldPoint::euclidean(vec![1.0]).unwrap();
        let y = integrate(&f, &x, 1.0, &IntegratorConfig::default()).unwrap();
        assert!((y.coords[0] - (-1.0f64).exp()).abs() < 1e-9);
        let back = integrate(&f, &y, -1.0, &IntegratorConfig::default()).unwrap();
        // two legs, each within the 1e-9 tolerance
        assert!((back.coords[0] - 1.0).abs() < 2e-9);
    }

    #[test]
    fn spiral_closed_form() {
        let f = linear([[1.0, -1.0], [1.0, 1.0]]);
        let x = ManifoldPoint::euclidean(vec![1.0, 0.0]).unwrap();
        for &t in &[0.5, 2.0, 4.0] {
            let y = integrate(&f, &x, t, &IntegratorConfig::default()).unwrap();
            let e = t.exp();
            let scale = e.max(1.0);
            assert!((y.coords[0] - e * t.cos()).abs() < 1e-8 * scale * (1.0 + t));
            assert!((y.coords[1] - e * t.sin()).abs() < 1e-8 * scale * (1.0 + t));
        }
    }

    #[test]
    fn dense_output_matches_closed_form() {
        // oracle: x(t) = cos t, sin t for the rotation field
        let f = linear([[0.0, -1.0], [1.0, 0.0]]);
        let x = ManifoldPoint::euclidean(vec![1.0, 0.0]).unwrap();
        let cfg = IntegratorConfig { h_max: 0.5, ..IntegratorConfig::with_tol(1e-10) };
        let mut worst: f64 = 0.0;
        flow_with(&f, &x, 6.0, &cfg, |s| {
            for k in 1..4 {
                let t = s.t0 + (s.t1 - s.t0) * k as f64 / 4.0;
                let mut c = [0.0; 2];
                s.coords_at(t, &mut c);
                worst = worst.max((c[0] - t.cos()).abs()).max((c[1] - t.sin()).abs());
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn zero_duration_returns_input() {
        let f = linear([[1.0, 0.0], [0.0, 1.0]]);
        let x = ManifoldPoint::euclidean(vec![0.3, 0.4]).unwrap();
        assert_eq!(integrate(&f, &x, 0.0, &IntegratorConfig::default()).unwrap(), x);
    }

    #[test]
    fn fixed_step_mode() {
        let f = linear([[-1.0, 0.0], [0.0, -2.0]]);
        let x = ManifoldPoint::euclidean(vec![1.0, 1.0]).unwrap();
        let cfg = IntegratorConfig { fixed_step: Some(0.01), ..Default::default() };
        let y = integrate(&f, &x, 1.0, &cfg).unwrap();
        assert!((y.coords[0] - (-1.0f64).exp()).abs() < 1e-10);
        assert!((y.coords[1] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn group_law() {
        let f = linear([[0.2, -1.0], [1.0, -0.3]]);
        let x = ManifoldPoint::euclidean(vec![0.7, -0.2]).unwrap();
        let cfg = IntegratorConfig::default();
        for &(s, t) in &[(0.3, 1.2), (2.0, -1.5), (-0.7, -0.4)] {
            let a = integrate(&f, &x, s + t, &cfg).unwrap();
            let b = integrate(&f, &integrate(&f, &x, s, &cfg).unwrap(), t, &cfg).unwrap();
            assert!(distance(&a, &b).unwrap() < 1e-8 * (1.0 + s.abs() + t.abs()));
        }
    }

    #[test]
    fn sampling_both_directions() {
        let f = linear([[-1.0, 0.0], [0.0, 1.0]]);
        let x = ManifoldPoint::euclidean(vec![1.0, 1.0]).unwrap();
        let times = [-1.0, -0.5, 0.0, 0.25, 1.0];
        let pts = sample_times(&f, &x, &times, &IntegratorConfig::default()).unwrap();
        for (t, p) in times.iter().zip(&pts) {
            assert!((p.coords[0] - (-t).exp()).abs() < 1e-8);
            assert!((p.coords[1] - t.exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn failing_evaluator_shrinks_step() {
        // field undefined for x > 1.05; the solution e^{t}/e^{1} stays below 1 for t < 1
        let f = VectorFieldDef::new("guard", Space::Euclidean(1), "", |c, x, out| {
            if x[0] > 1.05 {
                return Err(Error::OutsideChart { chart: c.name(), coords: x.to_vec() });
            }
            out[0] = x[0];
            Ok(())
        });
        let x = ManifoldPoint::euclidean(vec![(-1.0f64).exp()]).unwrap();
        let cfg = IntegratorConfig { h_max: 2.0, ..Default::default() };
        let y = integrate(&f, &x, 0.99, &cfg).unwrap();
        assert!((y.coords[0] - (-0.01f64).exp()).abs() < 1e-8);
    }
}
