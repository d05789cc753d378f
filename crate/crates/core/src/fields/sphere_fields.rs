//! The two factor fields on S².
//!
//! X₁: ṙ = 1 − r², φ̇ = 0 on the band, blended over pole radius [0.2, 0.4]
//! into diag(−2, −1) at the north pole and diag(2, 1) at the south pole.
//!
//! X₂: the round-sphere field V(e) = (x² − 1, xy + z, xz − y) = −∇x plus a
//! rotation about the x-axis, pulled back by a latitude map Θ that is the
//! identity to first order at the equator and smooth at the poles. Near
//! u₂ = (0, 0) and s₂ = (0, π) it is replaced by its exact linear part.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::manifold::{sphere, wrap_pm, Chart, Space, SphereChart};

use super::smoothstep;

const X1_INNER: f64 = 0.2;
const X1_OUTER: f64 = 0.4;
/// X₂ is exactly linear for |w| ≤ this, w the offset from u₂ or s₂ in (r, φ).
pub const X2_LINEAR_RADIUS: f64 = 0.2;
const X2_OUTER: f64 = 0.4;

/// Latitude map Θ(r) = r + a r³ + b r⁵ with Θ(1) = π/2, Θ′(0) = 1, Θ″(1) = 0.
pub mod latitude_map {
    use super::FRAC_PI_2;

    pub const B: f64 = -3.0 * (FRAC_PI_2 - 1.0) / 7.0;
    pub const A: f64 = -10.0 * B / 3.0;
    // colatitude from a pole as a polynomial in the pole radius ρ
    const C1: f64 = 1.0 + 3.0 * A + 5.0 * B;
    const C3: f64 = A + 10.0 * B;
    const C4: f64 = -5.0 * B;
    const C5: f64 = B;

    pub fn theta(r: f64) -> f64 {
        let r2 = r * r;
        r * (1.0 + r2 * (A + B * r2))
    }

    pub fn theta_deriv(r: f64) -> f64 {
        let r2 = r * r;
        1.0 + r2 * (3.0 * A + 5.0 * B * r2)
    }

    /// Colatitude θ(ρ) = π/2 − Θ(1 − ρ) divided by ρ.
    pub fn colat_over_rho(rho: f64) -> f64 {
        C1 + rho * rho * (C3 + rho * (C4 + C5 * rho))
    }

    pub fn colat_deriv(rho: f64) -> f64 {
        C1 + rho * rho * (3.0 * C3 + rho * (4.0 * C4 + 5.0 * C5 * rho))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn round_field(p: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = p;
    [x * x - 1.0, x * y + z, x * z - y]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pullback of the round field, band chart, |r| < 1.
fn v_band(r: f64, phi: f64) -> [f64; 2] {
    let lat = latitude_map::theta(r);
    let (sl, cl) = lat.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let v = round_field([cl * cp, cl * sp, sl]);
    let e_lat = [-sl * cp, -sl * sp, cl];
    let e_lon = [-sp, cp, 0.0];
    [dot(v, e_lat) / latitude_map::theta_deriv(r), dot(v, e_lon) / cl]
}

/// Pullback of the round field in a pole chart (defined at the pole too).
fn v_pole(pole: SphereChart, c: [f64; 2]) -> [f64; 2] {
    let rho = c[0].hypot(c[1]);
    let (sp, cp) = if rho > 0.0 { (c[1] / rho, c[0] / rho) } else { (0.0, 1.0) };
    let tor = latitude_map::colat_over_rho(rho);
    let th = tor * rho;
    let (st, ct) = th.sin_cos();
    // ρ / sin θ, finite at the pole
    let rho_over_sin = 1.0 / (sinc(th) * tor);
    let (p, e_th) = if pole == SphereChart::North {
        ([st * cp, st * sp, ct], [ct * cp, ct * sp, -st])
    } else {
        ([st * cp, st * sp, -ct], [ct * cp, ct * sp, st])
    };
    let v = round_field(p);
    let e_phi = [-sp, cp, 0.0];
    let rho_dot = dot(v, e_th) / latitude_map::colat_deriv(rho);
    let rho_phi_dot = rho_over_sin * dot(v, e_phi);
    [rho_dot * cp - rho_phi_dot * sp, rho_dot * sp + rho_phi_dot * cp]
}

/// X₁ in band coordinates.
pub fn x1_band(r: f64, phi: f64) -> [f64; 2] {
    let base = [1.0 - r * r, 0.0];
    let (s, c) = phi.sin_cos();
    let blend = |rho: f64, lin: [f64; 2]| {
        let w = smoothstep((rho - X1_INNER) / (X1_OUTER - X1_INNER));
        [(1.0 - w) * lin[0] + w * base[0], (1.0 - w) * lin[1] + w * base[1]]
    };
    let rho_n = 1.0 - r;
    let rho_s = 1.0 + r;
    if rho_n < X1_OUTER {
        blend(rho_n, [rho_n * (1.0 + c * c), s * c])
    } else if rho_s < X1_OUTER {
        blend(rho_s, [rho_s * (1.0 + c * c), -s * c])
    } else {
        base
    }
}

pub fn x1_eval(chart: SphereChart, c: [f64; 2]) -> [f64; 2] {
    match chart {
        SphereChart::Band => x1_band(c[0], c[1]),
        pole => {
            if c[0].hypot(c[1]) <= X1_INNER {
                let k = if pole == SphereChart::North { -1.0 } else { 1.0 };
                return [2.0 * k * c[0], k * c[1]];
            }
            let rp = sphere::to_band(pole, c);
            sphere::band_velocity_to_pole(pole, rp, x1_band(rp[0], rp[1]))
        }
    }
}

/// X₂ near one of its rest points, band coordinates; None outside the blend disk.
/// The linear part is rotated by `rot` (0 for X₂ itself).
fn x2_blend(r: f64, phi: f64, rot: f64) -> Option<[f64; 2]> {
    for (center, sign) in [(0.0, 1.0), (std::f64::consts::PI, -1.0)] {
        let w = [r, wrap_pm(phi - center)];
        let n = w[0].hypot(w[1]);
        if n < X2_OUTER {
            let lin = [sign * (w[0] - w[1]), sign * (w[0] + w[1])];
            let (sr, cr) = rot.sin_cos();
            let lin = [cr * lin[0] - sr * lin[1], sr * lin[0] + cr * lin[1]];
            if n <= X2_LINEAR_RADIUS {
                return Some(lin);
            }
            let s = smoothstep((n - X2_LINEAR_RADIUS) / (X2_OUTER - X2_LINEAR_RADIUS));
            let v = v_band(r, phi);
            return Some([(1.0 - s) * lin[0] + s * v[0], (1.0 - s) * lin[1] + s * v[1]]);
        }
    }
    None
}

pub fn x2_eval(chart: SphereChart, c: [f64; 2]) -> Result<[f64; 2]> {
    x2_eval_rotated(chart, c, 0.0)
}

fn x2_eval_rotated(chart: SphereChart, c: [f64; 2], rot: f64) -> Result<[f64; 2]> {
    match chart {
        SphereChart::Band => {
            if let Some(v) = x2_blend(c[0], c[1], rot) {
                return Ok(v);
            }
            if c[0].abs() >= 1.0 {
                return Err(Error::OutsideChart { chart: "band".into(), coords: c.to_vec() });
            }
            if c[0].abs() > 0.95 {
                let pole = if c[0] > 0.0 { SphereChart::North } else { SphereChart::South };
                let pc = sphere::from_band(pole, c);
                return Ok(sphere::pole_velocity_to_band(pole, pc, v_pole(pole, pc)));
            }
            Ok(v_band(c[0], c[1]))
        }
        pole => {
            let rp = sphere::to_band(pole, c);
            if rp[0].abs() < X2_OUTER {
                if let Some(v) = x2_blend(rp[0], rp[1], rot) {
                    return Ok(sphere::band_velocity_to_pole(pole, rp, v));
                }
            }
            Ok(v_pole(pole, c))
        }
    }
}

fn factor_chart(chart: Chart) -> Result<SphereChart> {
    match chart {
        Chart::Sphere(c) => Ok(c),
        other => Err(Error::UnknownChart { chart: other.name(), space: "S2".into() }),
    }
}

pub fn build_x1() -> VectorFieldDef {
    VectorFieldDef::new("x1", Space::Sphere, "C^inf; linear diag(-2,-1) for pole radius <= 0.2", |chart, c, out| {
        let v = x1_eval(factor_chart(chart)?, [c[0], c[1]]);
        out.copy_from_slice(&v);
        Ok(())
    })
}

pub fn build_x2() -> VectorFieldDef {
    VectorFieldDef::new(
        "x2",
        Space::Sphere,
        "C^inf on the band, C^1 at the poles; linear within radius 0.2 of u2 and s2",
        |chart, c, out| {
            let v = x2_eval(factor_chart(chart)?, [c[0], c[1]])?;
            out.copy_from_slice(&v);
            Ok(())
        },
    )
}

/// X₂ with both linear germs rotated by `angle`. Used to probe ρ₁.
pub fn build_x2_rotated(angle: f64) -> VectorFieldDef {
    VectorFieldDef::new("x2_rotated", Space::Sphere, "C^1; linear part of x2 rotated", move |chart, c, out| {
        let v = x2_eval_rotated(factor_chart(chart)?, [c[0], c[1]], angle)?;
        out.copy_from_slice(&v);
        Ok(())
    })
}
