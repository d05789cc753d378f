//! The field X* on M₁ × M₂ = S² × S².
//!
//! On M₁⁺ = {r₁ ≥ 0}: X⁺ = (X₁, w(r₁) X₂), w(r₁) = r₁² near the seam and 1
//! near the pole. On M₁⁻: X⁻(x) = −Df(f⁻¹x) X⁺(f⁻¹x) with
//! f(r₁, φ₁, r₂, φ₂) = (−r₁, φ₁, g₄g₂(r₂) + (1 − g₄)g₃(r₂), φ₂ + g₁).

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::manifold::{sphere, wrap_angle, Chart, ManifoldPoint, Space, SphereChart};

use super::sphere_fields::{x1_eval, x2_eval};
use super::{smoothstep, smoothstep_deriv};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XStarParams {
    /// Value of g₁ near the pole of M₁⁺ (rotation of M₂ by f there).
    pub g1_pole_value: f64,
    /// g₁ blends to its pole value over this r₁ interval.
    pub g1_blend: (f64, f64),
    /// g₂ = r − amp·(1 − r²)³.
    pub g2_amp: f64,
    /// g₄ = 1/2 + amp·sin φ₁·χ(r₁).
    pub g4_amp: f64,
    /// χ falls from 1 to 0 over this r₁ interval.
    pub g4_cutoff: (f64, f64),
    /// The M₂ weight moves from r₁² to 1 over this r₁ interval.
    pub weight_blend: (f64, f64),
}

impl Default for XStarParams {
    fn default() -> Self {
        XStarParams {
            g1_pole_value: FRAC_PI_2,
            g1_blend: (0.55, 0.75),
            g2_amp: 0.3,
            g4_amp: 0.25,
            g4_cutoff: (0.3, 0.5),
            weight_blend: (0.55, 0.75),
        }
    }
}

impl XStarParams {
    pub fn validate(&self) -> Result<()> {
        let interval = |(a, b): (f64, f64)| 0.0 < a && a < b && b < 1.0;
        let mut bad = vec![];
        if !(self.g1_pole_value > 0.0 && self.g1_pole_value < 2.0 * PI) {
            bad.push("g1_pole_value");
        }
        if !interval(self.g1_blend) {
            bad.push("g1_blend");
        }
        // g₂′ = 1 + 6·amp·r(1 − r²)² stays in (0, 2) iff amp < 1/(6·max r(1−r²)²)
        if !(self.g2_amp > 0.0 && self.g2_amp < 0.58) {
            bad.push("g2_amp");
        }
        if !(self.g4_amp > 0.0 && self.g4_amp < 0.5) {
            bad.push("g4_amp");
        }
        if !interval(self.g4_cutoff) {
            bad.push("g4_cutoff");
        }
        if !interval(self.weight_blend) {
            bad.push("weight_blend");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad X* parameters: {}", bad.join(", "))))
        }
    }
}

/// g₁, g₄ and their partials in band coordinates (r₁, φ₁).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValues {
    pub g1: f64,
    pub g1_r: f64,
    pub g1_phi: f64,
    pub g4: f64,
    pub g4_r: f64,
    pub g4_phi: f64,
}

#[derive(Clone, Debug)]
pub struct GFuncs {
    p: XStarParams,
}

impl GFuncs {
    pub fn new(p: XStarParams) -> Self {
        GFuncs { p }
    }

    pub fn g1_raw(&self, r1: f64, phi1: f64) -> f64 {
        let s = (0.5 * phi1).sin();
        PI * (1.0 - (-(r1.powi(4) + 4.0 * s * s)).exp())
    }

    pub fn eval(&self, r1: f64, phi1: f64) -> GValues {
        let p = &self.p;
        let (sp, cp) = phi1.sin_cos();
        let s = (0.5 * phi1).sin();
        let e = (-(r1.powi(4) + 4.0 * s * s)).exp();
        let raw = PI * (1.0 - e);
        let raw_r = 4.0 * PI * e * r1.powi(3);
        let raw_phi = 2.0 * PI * e * sp;
        let (a, b) = p.g1_blend;
        let sig = smoothstep((r1 - a) / (b - a));
        let sig_r = smoothstep_deriv((r1 - a) / (b - a)) / (b - a);
        let c = p.g1_pole_value;
        let g1 = (1.0 - sig) * raw + sig * c;
        let g1_r = sig_r * (c - raw) + (1.0 - sig) * raw_r;
        let g1_phi = (1.0 - sig) * raw_phi;

        let (a4, b4) = p.g4_cutoff;
        let chi = 1.0 - smoothstep((r1 - a4) / (b4 - a4));
        let chi_r = -smoothstep_deriv((r1 - a4) / (b4 - a4)) / (b4 - a4);
        GValues {
            g1,
            g1_r,
            g1_phi,
            g4: 0.5 + p.g4_amp * sp * chi,
            g4_r: p.g4_amp * sp * chi_r,
            g4_phi: p.g4_amp * cp * chi,
        }
    }

    /// b(r) = amp·(1 − r²)³, so g₂ = r − b and g₃ = r + b.
    pub fn b(&self, r: f64) -> f64 {
        let q = 1.0 - r * r;
        self.p.g2_amp * q * q * q
    }

    pub fn b_deriv(&self, r: f64) -> f64 {
        let q = 1.0 - r * r;
        -6.0 * self.p.g2_amp * r * q * q
    }

    pub fn g2(&self, r: f64) -> f64 {
        r - self.b(r)
    }

    pub fn g2_deriv(&self, r: f64) -> f64 {
        1.0 - self.b_deriv(r)
    }

    pub fn g3(&self, r: f64) -> f64 {
        r + self.b(r)
    }

    /// The M₂ weight w(r₁) of X⁺.
    pub fn weight(&self, r1: f64) -> f64 {
        let (a, b) = self.p.weight_blend;
        let s = smoothstep((r1 - a) / (b - a));
        (1.0 - s) * r1 * r1 + s
    }

    /// G values and gradients with respect to the M₁ chart coordinates.
    fn eval_chart(&self, c1: SphereChart, m1: [f64; 2]) -> (GValues, [f64; 2], [f64; 2]) {
        match c1 {
            SphereChart::Band => {
                let g = self.eval(m1[0], m1[1]);
                (g, [g.g1_r, g.g1_phi], [g.g4_r, g.g4_phi])
            }
            _ => {
                let rho = m1[0].hypot(m1[1]);
                let rp = sphere::to_band(c1, m1);
                // sign of ∂r/∂ρ: r = 1 − ρ (north), r = ρ − 1 (south)
                let k = if c1 == SphereChart::North { -1.0 } else { 1.0 };
                let g = self.eval(rp[0], rp[1]);
                let inner = 1.0 - self.p.g1_blend.1.max(self.p.g4_cutoff.1);
                if rho <= inner || rho == 0.0 {
                    return (g, [0.0; 2], [0.0; 2]);
                }
                let (x, y) = (m1[0], m1[1]);
                let rho2 = rho * rho;
                let grad = |dr: f64, dphi: f64| [k * dr * x / rho - dphi * y / rho2, k * dr * y / rho + dphi * x / rho2];
                (g, grad(g.g1_r, g.g1_phi), grad(g.g4_r, g.g4_phi))
            }
        }
    }
}

/// The gluing map f: M₁⁺ × M₂ → M₁⁻ × M₂, evaluated chartwise.
#[derive(Clone, Debug)]
pub struct FStar {
    g: GFuncs,
}

fn rot(a: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn plus_side(c1: SphereChart, m1: [f64; 2]) -> bool {
    match c1 {
        SphereChart::North => true,
        SphereChart::South => false,
        SphereChart::Band => m1[0] >= 0.0,
    }
}

impl FStar {
    pub fn gfuncs(&self) -> &GFuncs {
        &self.g
    }

    fn pole_sign(c2: SphereChart) -> f64 {
        if c2 == SphereChart::North {
            1.0
        } else {
            -1.0
        }
    }

    /// Pole-chart radial factor k(ρ) with ρ′ = ρ k(ρ).
    fn k(&self, c2: SphereChart, rho: f64, g4: f64) -> f64 {
        let q = 2.0 - rho;
        1.0 - Self::pole_sign(c2) * self.g.p.g2_amp * rho * rho * q * q * q * (1.0 - 2.0 * g4)
    }

    fn m1_image(c1: SphereChart, m1: [f64; 2]) -> (SphereChart, [f64; 2]) {
        match c1 {
            SphereChart::Band => (SphereChart::Band, [-m1[0], m1[1]]),
            SphereChart::North => (SphereChart::South, m1),
            SphereChart::South => (SphereChart::North, m1),
        }
    }

    /// f on chart coordinates of a point with r₁ ≥ 0.
    pub fn forward_coords(&self, chart: Chart, c: &[f64]) -> Result<(Chart, [f64; 4])> {
        let Chart::Pair(c1, c2) = chart else {
            return Err(Error::UnknownChart { chart: chart.name(), space: "S2xS2".into() });
        };
        let m1 = [c[0], c[1]];
        if !plus_side(c1, m1) {
            return Err(Error::InvalidArgument("f is defined on r1 >= 0".into()));
        }
        let (g, _, _) = self.g.eval_chart(c1, m1);
        let (oc1, om1) = Self::m1_image(c1, m1);
        let m2 = match c2 {
            SphereChart::Band => {
                let r = c[2];
                [r + self.g.b(r) * (1.0 - 2.0 * g.g4), wrap_angle(c[3] + g.g1)]
            }
            _ => {
                let v = [c[2], c[3]];
                let rho = v[0].hypot(v[1]);
                let k = self.k(c2, rho, g.g4);
                let w = rot(g.g1, v);
                [k * w[0], k * w[1]]
            }
        };
        Ok((Chart::Pair(oc1, c2), [om1[0], om1[1], m2[0], m2[1]]))
    }

    /// f⁻¹ on chart coordinates of a point with r₁ ≤ 0.
    pub fn inverse_coords(&self, chart: Chart, c: &[f64]) -> Result<(Chart, [f64; 4])> {
        let Chart::Pair(c1, c2) = chart else {
            return Err(Error::UnknownChart { chart: chart.name(), space: "S2xS2".into() });
        };
        let m1 = [c[0], c[1]];
        if c1 == SphereChart::North || (c1 == SphereChart::Band && m1[0] > 0.0) {
            return Err(Error::InvalidArgument("f^-1 is defined on r1 <= 0".into()));
        }
        let (pc1, pm1) = Self::m1_image(c1, m1);
        let (g, _, _) = self.g.eval_chart(pc1, pm1);
        let s = 1.0 - 2.0 * g.g4;
        let m2 = match c2 {
            SphereChart::Band => {
                let target = c[2];
                let r = self.solve_monotone(|r| (r + self.g.b(r) * s - target, 1.0 + self.g.b_deriv(r) * s), target, -1.0, 1.0)?;
                [r, wrap_angle(c[3] - g.g1)]
            }
            _ => {
                let v = [c[2], c[3]];
                let rho_t = v[0].hypot(v[1]);
                if rho_t == 0.0 {
                    [0.0, 0.0]
                } else {
                    let amp = self.g.p.g2_amp * Self::pole_sign(c2) * s;
                    let rho = self.solve_monotone(
                        |rho| {
                            let q = 2.0 - rho;
                            let val = rho - amp * rho.powi(3) * q.powi(3) - rho_t;
                            let der = 1.0 - amp * (3.0 * rho * rho * q.powi(3) - 3.0 * rho.powi(3) * q * q);
                            (val, der)
                        },
                        rho_t,
                        0.0,
                        2.0,
                    )?;
                    let w = rot(-g.g1, v);
                    [w[0] * rho / rho_t, w[1] * rho / rho_t]
                }
            }
        };
        Ok((Chart::Pair(pc1, c2), [pm1[0], pm1[1], m2[0], m2[1]]))
    }

    /// Newton with a bisection safeguard for an increasing function on [lo, hi].
    fn solve_monotone<F: Fn(f64) -> (f64, f64)>(&self, f: F, x0: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        let mut x = x0.clamp(lo, hi);
        for _ in 0..100 {
            let (v, d) = f(x);
            if v == 0.0 {
                return Ok(x);
            }
            if v > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - v / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-16 {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::RootFinding("inverse of f did not converge".into()))
    }

    /// Df at a point with r₁ ≥ 0, from its chart to the chart of the image.
    pub fn jacobian_coords(&self, chart: Chart, c: &[f64]) -> Result<[[f64; 4]; 4]> {
        let Chart::Pair(c1, c2) = chart else {
            return Err(Error::UnknownChart { chart: chart.name(), space: "S2xS2".into() });
        };
        let m1 = [c[0], c[1]];
        let (g, dg1, dg4) = self.g.eval_chart(c1, m1);
        let mut d = [[0.0; 4]; 4];
        if c1 == SphereChart::Band {
            d[0][0] = -1.0;
        } else {
            d[0][0] = 1.0;
        }
        d[1][1] = 1.0;
        match c2 {
            SphereChart::Band => {
                let r = c[2];
                let b = self.g.b(r);
                d[2][0] = -2.0 * b * dg4[0];
                d[2][1] = -2.0 * b * dg4[1];
                d[2][2] = 1.0 + self.g.b_deriv(r) * (1.0 - 2.0 * g.g4);
                d[3][0] = dg1[0];
                d[3][1] = dg1[1];
                d[3][3] = 1.0;
            }
            _ => {
                let v = [c[2], c[3]];
                let rho = v[0].hypot(v[1]);
                let q = 2.0 - rho;
                let sgn = Self::pole_sign(c2);
                let amp = self.g.p.g2_amp;
                let k = self.k(c2, rho, g.g4);
                let k_over = -sgn * amp * (1.0 - 2.0 * g.g4) * (2.0 * q.powi(3) - 3.0 * rho * q * q);
                let dk_dg4 = 2.0 * sgn * amp * rho * rho * q.powi(3);
                let rv = rot(g.g1, v);
                // ∂m′/∂g₁ = k J R v, ∂m′/∂g₄ = (∂k/∂g₄) R v
                let d_g1 = [-k * rv[1], k * rv[0]];
                let d_g4 = [dk_dg4 * rv[0], dk_dg4 * rv[1]];
                for i in 0..2 {
                    for j in 0..2 {
                        d[2 + i][j] = d_g1[i] * dg1[j] + d_g4[i] * dg4[j];
                    }
                }
                // R (k I + (k′/ρ) v vᵀ)
                let inner = [[k + k_over * v[0] * v[0], k_over * v[0] * v[1]], [k_over * v[0] * v[1], k + k_over * v[1] * v[1]]];
                let (s, cth) = g.g1.sin_cos();
                let r = [[cth, -s], [s, cth]];
                for i in 0..2 {
                    for j in 0..2 {
                        d[2 + i][2 + j] = r[i][0] * inner[0][j] + r[i][1] * inner[1][j];
                    }
                }
            }
        }
        Ok(d)
    }

    pub fn forward(&self, x: &ManifoldPoint) -> Result<ManifoldPoint> {
        let (chart, c) = self.forward_coords(x.chart, &x.coords)?;
        ManifoldPoint::new(Space::SpherePair, chart, c.to_vec())
    }

    pub fn inverse(&self, x: &ManifoldPoint) -> Result<ManifoldPoint> {
        let (chart, c) = self.inverse_coords(x.chart, &x.coords)?;
        ManifoldPoint::new(Space::SpherePair, chart, c.to_vec())
    }
}

pub fn build_fstar(params: XStarParams) -> Result<FStar> {
    params.validate()?;
    Ok(FStar { g: GFuncs::new(params) })
}

struct Core {
    f: FStar,
}

impl Core {
    fn xplus(&self, c1: SphereChart, c2: SphereChart, c: &[f64], out: &mut [f64]) -> Result<()> {
        let v1 = x1_eval(c1, [c[0], c[1]]);
        let r1 = sphere::to_band(c1, [c[0], c[1]])[0];
        let w = self.f.g.weight(r1);
        let v2 = x2_eval(c2, [c[2], c[3]])?;
        out[0] = v1[0];
        out[1] = v1[1];
        out[2] = w * v2[0];
        out[3] = w * v2[1];
        Ok(())
    }

    fn xminus(&self, chart: Chart, c: &[f64], out: &mut [f64]) -> Result<()> {
        let (pchart, y) = self.f.inverse_coords(chart, c)?;
        let Chart::Pair(p1, p2) = pchart else { unreachable!() };
        let mut v = [0.0; 4];
        self.xplus(p1, p2, &y, &mut v)?;
        let d = self.f.jacobian_coords(pchart, &y)?;
        for i in 0..4 {
            out[i] = -(0..4).map(|j| d[i][j] * v[j]).sum::<f64>();
        }
        Ok(())
    }

    fn eval(&self, chart: Chart, c: &[f64], out: &mut [f64]) -> Result<()> {
        let Chart::Pair(c1, c2) = chart else {
            return Err(Error::UnknownChart { chart: chart.name(), space: "S2xS2".into() });
        };
        if plus_side(c1, [c[0], c[1]]) {
            self.xplus(c1, c2, c, out)
        } else {
            self.xminus(chart, c, out)
        }
    }
}

#[derive(Clone)]
pub struct XStarSystem {
    pub field: VectorFieldDef,
    pub params: XStarParams,
    pub fstar: FStar,
    pub p_star: ManifoldPoint,
    pub q_star: ManifoldPoint,
    pub s_star: ManifoldPoint,
    pub u_star: ManifoldPoint,
    core: Arc<Core>,
}

impl std::fmt::Debug for XStarSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("XStarSystem").field("params", &self.params).finish()
    }
}

impl XStarSystem {
    pub fn gfuncs(&self) -> &GFuncs {
        &self.fstar.g
    }

    /// X⁺ formula at any point of its domain (M₁ band with r₁ ≥ 0 or north chart).
    pub fn xplus(&self, x: &ManifoldPoint) -> Result<Vec<f64>> {
        let Chart::Pair(c1, c2) = x.chart else {
            return Err(Error::UnknownChart { chart: x.chart.name(), space: "S2xS2".into() });
        };
        let mut out = vec![0.0; 4];
        self.core.xplus(c1, c2, &x.coords, &mut out)?;
        Ok(out)
    }

    /// X⁻ formula at any point of its domain (M₁ band with r₁ ≤ 0 or south chart).
    pub fn xminus(&self, x: &ManifoldPoint) -> Result<Vec<f64>> {
        let mut out = vec![0.0; 4];
        self.core.xminus(x.chart, &x.coords, &mut out)?;
        Ok(out)
    }

    /// Largest |X⁺ − X⁻| and |X⁺ − (1,0,0,0)| on an n×n×n grid of the seam r₁ = 0
    /// (φ₁, φ₂ uniform on [0, 2π), r₂ uniform on [−0.99, 0.99]).
    pub fn seam_defect(&self, n: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        let band = Chart::Pair(SphereChart::Band, SphereChart::Band);
        for i in 0..n {
            let phi1 = 2.0 * PI * i as f64 / n as f64;
            for j in 0..n {
                let r2 = if n > 1 { -0.99 + 1.98 * j as f64 / (n - 1) as f64 } else { 0.0 };
                for k in 0..n {
                    let phi2 = 2.0 * PI * k as f64 / n as f64;
                    let c = [0.0, phi1, r2, phi2];
                    self.core.xplus(SphereChart::Band, SphereChart::Band, &c, &mut a)?;
                    self.core.xminus(band, &c, &mut b)?;
                    let target = [1.0, 0.0, 0.0, 0.0];
                    for m in 0..4 {
                        worst = worst.max((a[m] - b[m]).abs()).max((a[m] - target[m]).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Tangent of f(l) at the origin, l = {r₁ = 0, r₂ = 0, φ₂ = 0}, in (r₁, φ₁, r₂, φ₂).
    pub fn fl_tangent(&self) -> Result<[f64; 4]> {
        let d = self.fstar.jacobian_coords(Chart::Pair(SphereChart::Band, SphereChart::Band), &[0.0; 4])?;
        Ok([d[0][1], d[1][1], d[2][1], d[3][1]])
    }
}

fn pair(c1: SphereChart, c2: SphereChart, c: [f64; 4]) -> ManifoldPoint {
    ManifoldPoint::new(Space::SpherePair, Chart::Pair(c1, c2), c.to_vec()).expect("valid rest point")
}

pub fn build_xstar(params: XStarParams) -> Result<XStarSystem> {
    let fstar = build_fstar(params.clone())?;
    let core = Arc::new(Core { f: fstar.clone() });
    let inner = core.clone();
    let field = VectorFieldDef::new(
        "xstar",
        Space::SpherePair,
        "C^1 on S2xS2 (C^inf away from the seam r1 = 0 and the M2 poles); exactly linear near p*, q*",
        move |chart, c, out| inner.eval(chart, c, out),
    );
    let c = params.g1_pole_value;
    let (n, s, b) = (SphereChart::North, SphereChart::South, SphereChart::Band);
    let sys = XStarSystem {
        field,
        fstar,
        p_star: pair(n, b, [0.0, 0.0, 0.0, 0.0]),
        s_star: pair(n, b, [0.0, 0.0, 0.0, PI]),
        q_star: pair(s, b, [0.0, 0.0, 0.0, c]),
        u_star: pair(s, b, [0.0, 0.0, 0.0, wrap_angle(c + PI)]),
        params,
        core,
    };
    let defect = sys.seam_defect(12)?;
    if defect > 1e-8 {
        return Err(Error::InvalidArgument(format!("gluing mismatch {defect:e} on the seam")));
    }
    Ok(sys)
}
