//! Charted phase spaces: Euclidean space, the sphere with a band chart and
//! two pole charts, and the product of two spheres.
//!
//! Sphere band chart: (r, φ), r ∈ [−1, 1], φ ∈ [0, 2π); every point with
//! r = ±1 is the same pole. Pole charts: (ξ, η) = ((1 ∓ r) cos φ, (1 ∓ r) sin φ).

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};

/// Band chart is used by the integrator while |r| <= this.
pub const BAND_LIMIT: f64 = 0.9;
/// Pole charts hand back to the band once the pole radius exceeds this.
pub const POLE_LIMIT: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Euclidean(usize),
    Sphere,
    SpherePair,
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Euclidean(n) => *n,
            Space::Sphere => 2,
            Space::SpherePair => 4,
        }
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Space::Euclidean(n) => *n,
            Space::Sphere => 3,
            Space::SpherePair => 6,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Space::Euclidean(n) => format!("R{n}"),
            Space::Sphere => "S2".into(),
            Space::SpherePair => "S2xS2".into(),
        }
    }

    /// The chart a freshly constructed point of this space uses by default.
    pub fn default_chart(&self) -> Chart {
        match self {
            Space::Euclidean(_) => Chart::Flat,
            Space::Sphere => Chart::Sphere(SphereChart::Band),
            Space::SpherePair => Chart::Pair(SphereChart::Band, SphereChart::Band),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereChart {
    Band,
    North,
    South,
}

impl SphereChart {
    pub fn name(&self) -> &'static str {
        match self {
            SphereChart::Band => "band",
            SphereChart::North => "north",
            SphereChart::South => "south",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "band" => Some(SphereChart::Band),
            "north" => Some(SphereChart::North),
            "south" => Some(SphereChart::South),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Flat,
    Sphere(SphereChart),
    Pair(SphereChart, SphereChart),
}

impl Chart {
    pub fn name(&self) -> String {
        match self {
            Chart::Flat => "flat".into(),
            Chart::Sphere(c) => c.name().into(),
            Chart::Pair(a, b) => format!("{}|{}", a.name(), b.name()),
        }
    }

    pub fn parse(s: &str) -> Result<Chart> {
        let unknown = || Error::UnknownChart { chart: s.into(), space: "?".into() };
        if s == "flat" {
            return Ok(Chart::Flat);
        }
        if let Some((a, b)) = s.split_once('|') {
            let a = SphereChart::parse(a).ok_or_else(unknown)?;
            let b = SphereChart::parse(b).ok_or_else(unknown)?;
            return Ok(Chart::Pair(a, b));
        }
        SphereChart::parse(s).map(Chart::Sphere).ok_or_else(unknown)
    }

    pub fn belongs_to(&self, space: Space) -> bool {
        matches!(
            (self, space),
            (Chart::Flat, Space::Euclidean(_)) | (Chart::Sphere(_), Space::Sphere) | (Chart::Pair(..), Space::SpherePair)
        )
    }

    /// Indices of coordinates that are angles (band φ slots).
    pub fn angle_slots(&self) -> Vec<usize> {
        match self {
            Chart::Flat => vec![],
            Chart::Sphere(c) => (*c == SphereChart::Band).then_some(1).into_iter().collect(),
            Chart::Pair(a, b) => {
                let mut v = vec![];
                if *a == SphereChart::Band {
                    v.push(1);
                }
                if *b == SphereChart::Band {
                    v.push(3);
                }
                v
            }
        }
    }

    pub fn factors(&self) -> Vec<SphereChart> {
        match self {
            Chart::Flat => vec![],
            Chart::Sphere(c) => vec![*c],
            Chart::Pair(a, b) => vec![*a, *b],
        }
    }

    fn from_factors(space: Space, f: &[SphereChart]) -> Chart {
        match space {
            Space::Euclidean(_) => Chart::Flat,
            Space::Sphere => Chart::Sphere(f[0]),
            Space::SpherePair => Chart::Pair(f[0], f[1]),
        }
    }
}

/// Angle wrapped into [0, 2π).
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angle wrapped into (−π, π].
pub fn wrap_pm(a: f64) -> f64 {
    let w = wrap_angle(a);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

pub mod sphere {
    //! Coordinate changes on a single sphere factor.
    use super::*;

    pub fn in_domain(chart: SphereChart, c: [f64; 2]) -> bool {
        match chart {
            SphereChart::Band => c[0].abs() <= 1.0,
            _ => c[0].hypot(c[1]) < 2.0,
        }
    }

    /// (r, φ) of a point; φ = 0 at the poles.
    pub fn to_band(chart: SphereChart, c: [f64; 2]) -> [f64; 2] {
        match chart {
            SphereChart::Band => [c[0], wrap_angle(c[1])],
            SphereChart::North | SphereChart::South => {
                let rho = c[0].hypot(c[1]);
                let phi = if rho > 0.0 { wrap_angle(c[1].atan2(c[0])) } else { 0.0 };
                let r = if chart == SphereChart::North { 1.0 - rho } else { rho - 1.0 };
                [r, phi]
            }
        }
    }

    pub fn from_band(chart: SphereChart, rp: [f64; 2]) -> [f64; 2] {
        match chart {
            SphereChart::Band => [rp[0], wrap_angle(rp[1])],
            SphereChart::North => {
                let rho = 1.0 - rp[0];
                [rho * rp[1].cos(), rho * rp[1].sin()]
            }
            SphereChart::South => {
                let rho = 1.0 + rp[0];
                [rho * rp[1].cos(), rho * rp[1].sin()]
            }
        }
    }

    pub fn convert(from: SphereChart, to: SphereChart, c: [f64; 2]) -> [f64; 2] {
        if from == to {
            if from == SphereChart::Band {
                return [c[0], wrap_angle(c[1])];
            }
            return c;
        }
        if from != SphereChart::Band && to != SphereChart::Band {
            // north <-> south goes through the band; only sensible away from both poles
            return from_band(to, to_band(from, c));
        }
        from_band(to, to_band(from, c))
    }

    /// Chordal embedding e(r, φ) = (√(1−r²) cos φ, √(1−r²) sin φ, r).
    pub fn embed(chart: SphereChart, c: [f64; 2]) -> [f64; 3] {
        match chart {
            SphereChart::Band => {
                let r = c[0].clamp(-1.0, 1.0);
                let s = (1.0 - r * r).max(0.0).sqrt();
                [s * c[1].cos(), s * c[1].sin(), r]
            }
            SphereChart::North | SphereChart::South => {
                let rho = c[0].hypot(c[1]);
                let (x, y) = if rho > 0.0 {
                    let k = ((2.0 - rho).max(0.0) / rho).sqrt();
                    (c[0] * k, c[1] * k)
                } else {
                    (0.0, 0.0)
                };
                let z = if chart == SphereChart::North { 1.0 - rho } else { rho - 1.0 };
                [x, y, z]
            }
        }
    }

    /// Chart the integrator should move to, if any (hysteresis between the
    /// band switch radius and the pole hand-back radius).
    pub fn switch(chart: SphereChart, c: [f64; 2]) -> Option<(SphereChart, [f64; 2])> {
        match chart {
            SphereChart::Band => {
                if c[0] > BAND_LIMIT {
                    Some((SphereChart::North, from_band(SphereChart::North, c)))
                } else if c[0] < -BAND_LIMIT {
                    Some((SphereChart::South, from_band(SphereChart::South, c)))
                } else {
                    None
                }
            }
            _ => {
                if c[0].hypot(c[1]) > POLE_LIMIT {
                    Some((SphereChart::Band, to_band(chart, c)))
                } else {
                    None
                }
            }
        }
    }

    /// Chart used for a canonical representation of a point.
    pub fn preferred(r: f64) -> SphereChart {
        if r > 0.85 {
            SphereChart::North
        } else if r < -0.85 {
            SphereChart::South
        } else {
            SphereChart::Band
        }
    }

    /// Band velocity (ṙ, φ̇) at (r, φ) expressed in a pole chart.
    pub fn band_velocity_to_pole(pole: SphereChart, rp: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        let (rho, rho_dot) = match pole {
            SphereChart::North => (1.0 - rp[0], -v[0]),
            SphereChart::South => (1.0 + rp[0], v[0]),
            SphereChart::Band => return v,
        };
        let (s, c) = rp[1].sin_cos();
        [rho_dot * c - rho * v[1] * s, rho_dot * s + rho * v[1] * c]
    }

    /// Pole-chart velocity at (ξ, η) ≠ 0 expressed in the band chart.
    pub fn pole_velocity_to_band(pole: SphereChart, c: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        let rho2 = c[0] * c[0] + c[1] * c[1];
        let rho = rho2.sqrt();
        let rho_dot = (c[0] * v[0] + c[1] * v[1]) / rho;
        let phi_dot = (c[0] * v[1] - c[1] * v[0]) / rho2;
        match pole {
            SphereChart::North => [-rho_dot, phi_dot],
            SphereChart::South => [rho_dot, phi_dot],
            SphereChart::Band => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub space: Space,
    pub chart: Chart,
    pub coords: Vec<f64>,
}

impl ManifoldPoint {
    /// Validated constructor; band angles are wrapped into [0, 2π).
    pub fn new(space: Space, chart: Chart, coords: Vec<f64>) -> Result<Self> {
        if !chart.belongs_to(space) {
            return Err(Error::UnknownChart { chart: chart.name(), space: space.id() });
        }
        if coords.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), got: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(coords));
        }
        let mut p = ManifoldPoint { space, chart, coords };
        for (k, f) in chart.factors().into_iter().enumerate() {
            let c = [p.coords[2 * k], p.coords[2 * k + 1]];
            if !sphere::in_domain(f, c) {
                return Err(Error::OutsideChart { chart: chart.name(), coords: p.coords });
            }
        }
        for i in chart.angle_slots() {
            p.coords[i] = wrap_angle(p.coords[i]);
        }
        Ok(p)
    }

    pub fn euclidean(coords: Vec<f64>) -> Result<Self> {
        Self::new(Space::Euclidean(coords.len()), Chart::Flat, coords)
    }

    /// Point of S² × S² from band coordinates (r₁, φ₁, r₂, φ₂).
    pub fn pair_band(r1: f64, phi1: f64, r2: f64, phi2: f64) -> Result<Self> {
        Self::new(Space::SpherePair, Chart::Pair(SphereChart::Band, SphereChart::Band), vec![r1, phi1, r2, phi2])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn factor(&self, k: usize) -> [f64; 2] {
        [self.coords[2 * k], self.coords[2 * k + 1]]
    }

    /// Same point expressed in another chart of the same space.
    pub fn to_chart(&self, chart: Chart) -> Result<Self> {
        if !chart.belongs_to(self.space) {
            return Err(Error::UnknownChart { chart: chart.name(), space: self.space.id() });
        }
        if chart == self.chart {
            return Ok(self.clone());
        }
        let from = self.chart.factors();
        let to = chart.factors();
        let mut coords = Vec::with_capacity(self.dim());
        for k in 0..from.len() {
            let c = sphere::convert(from[k], to[k], self.factor(k));
            coords.extend_from_slice(&c);
        }
        ManifoldPoint::new(self.space, chart, coords)
    }

    /// Band coordinates of every sphere factor; Euclidean points are returned as is.
    pub fn band_coords(&self) -> Vec<f64> {
        match self.space {
            Space::Euclidean(_) => self.coords.clone(),
            _ => {
                let mut out = Vec::with_capacity(self.dim());
                for (k, f) in self.chart.factors().into_iter().enumerate() {
                    out.extend_from_slice(&sphere::to_band(f, self.factor(k)));
                }
                out
            }
        }
    }

    /// Representation in the preferred chart of each factor (pole charts near
    /// the poles, band elsewhere).
    pub fn canonical(&self) -> Self {
        if let Space::Euclidean(_) = self.space {
            return self.clone();
        }
        let band = self.band_coords();
        let factors: Vec<SphereChart> = (0..band.len() / 2).map(|k| sphere::preferred(band[2 * k])).collect();
        let chart = Chart::from_factors(self.space, &factors);
        self.to_chart(chart).unwrap_or_else(|_| self.clone())
    }

    /// Chordal embedding in R^n, R³ or R⁶.
    pub fn embed(&self) -> Vec<f64> {
        match self.chart {
            Chart::Flat => self.coords.clone(),
            _ => {
                let mut out = Vec::with_capacity(self.space.embed_dim());
                for (k, f) in self.chart.factors().into_iter().enumerate() {
                    out.extend_from_slice(&sphere::embed(f, self.factor(k)));
                }
                out
            }
        }
    }
}

/// Coordinates checked against a chart, with band angles wrapped. Used after
/// adding offsets in chart coordinates; band radii past a pole are reflected
/// through it.
pub fn point_from_chart(space: Space, chart: Chart, mut coords: Vec<f64>) -> Result<ManifoldPoint> {
    for (k, f) in chart.factors().into_iter().enumerate() {
        if f == SphereChart::Band {
            let r = coords[2 * k];
            if r > 1.0 {
                coords[2 * k] = 2.0 - r;
                coords[2 * k + 1] += PI;
            } else if r < -1.0 {
                coords[2 * k] = -2.0 - r;
                coords[2 * k + 1] += PI;
            }
        }
    }
    ManifoldPoint::new(space, chart, coords)
}

/// Componentwise difference a − b in a common chart, band angles wrapped to (−π, π].
pub fn chart_difference(chart: Chart, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    for i in chart.angle_slots() {
        d[i] = wrap_pm(d[i]);
    }
    d
}

pub fn embedded_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Chordal product distance √(d₁² + d₂²) (Euclidean norm for flat spaces).
pub fn distance(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    if x.space != y.space {
        return Err(Error::SpaceMismatch(x.space.id(), y.space.id()));
    }
    Ok(embedded_distance(&x.embed(), &y.embed()))
}
