//! Rest-point search: damped Newton from a grid of starts, dedupe, classify.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::jacobian::jacobian;
use crate::manifold::{distance, ManifoldPoint, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestKind {
    Attracting,
    Repelling,
    Saddle,
    Nonhyperbolic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestPointInfo {
    pub point: ManifoldPoint,
    pub residual: f64,
    /// (re, im), sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub kind: RestKind,
}

/// Classify a rest point from its Jacobian eigenvalues; |Re λ| ≤ `hyp_tol` counts as zero.
pub fn classify(field: &VectorFieldDef, x: &ManifoldPoint, hyp_tol: f64) -> Result<RestPointInfo> {
    let x = x.canonical();
    let v = field.evaluate(&x)?;
    let ev = jacobian(field, &x, 1e-6)?.eigenvalues();
    let kind = if ev.iter().any(|l| l.re.abs() <= hyp_tol) {
        RestKind::Nonhyperbolic
    } else if ev.iter().all(|l| l.re < 0.0) {
        RestKind::Attracting
    } else if ev.iter().all(|l| l.re > 0.0) {
        RestKind::Repelling
    } else {
        RestKind::Saddle
    };
    Ok(RestPointInfo {
        residual: v.iter().map(|a| a * a).sum::<f64>().sqrt(),
        eigenvalues: ev.iter().map(|l| (l.re, l.im)).collect(),
        point: x,
        kind,
    })
}

/// About n roughly uniform points on S² (Fibonacci lattice), as band (r, φ).
fn sphere_grid(n: usize) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(|i| (1.0 - (2.0 * i as f64 + 1.0) / n as f64, (golden * i as f64).rem_euclid(2.0 * PI))).collect()
}

/// Start points for a census: `per_factor` points on each sphere factor (product grid),
/// or a cube grid of side `per_factor` on [−box_half, box_half]^n in R^n.
pub fn census_starts(space: Space, per_factor: usize, box_half: f64) -> Result<Vec<ManifoldPoint>> {
    match space {
        Space::Sphere => sphere_grid(per_factor).into_iter().map(|(r, p)| ManifoldPoint::new(space, space.default_chart(), vec![r, p]).map(|x| x.canonical())).collect(),
        Space::SpherePair => {
            let g = sphere_grid(per_factor);
            let mut out = Vec::with_capacity(g.len() * g.len());
            for &(r1, p1) in &g {
                for &(r2, p2) in &g {
                    out.push(ManifoldPoint::pair_band(r1, p1, r2, p2)?.canonical());
                }
            }
            Ok(out)
        }
        Space::Euclidean(n) => {
            let total = per_factor.checked_pow(n as u32).filter(|&t| t <= 1_000_000).ok_or_else(|| Error::SizeCap("census grid too large".into()))?;
            let side = |k: usize| if per_factor == 1 { 0.0 } else { -box_half + 2.0 * box_half * k as f64 / (per_factor - 1) as f64 };
            (0..total)
                .map(|mut idx| {
                    let mut c = Vec::with_capacity(n);
                    for _ in 0..n {
                        c.push(side(idx % per_factor));
                        idx /= per_factor;
                    }
                    ManifoldPoint::euclidean(c)
                })
                .collect()
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Damped Newton on X(x) = 0 in the canonical chart. Returns the point if |X| ≤ tol.
fn newton(field: &VectorFieldDef, x0: &ManifoldPoint, tol: f64, max_iter: usize) -> Option<ManifoldPoint> {
    let mut x = x0.canonical();
    let mut v = field.evaluate(&x).ok()?;
    for _ in 0..max_iter {
        if norm(&v) <= tol {
            return Some(x);
        }
        let j = jacobian(field, &x, 1e-7).ok()?.to_dmatrix();
        let step = j.lu().solve(&nalgebra::DVector::from_column_slice(&v))?;
        let len = step.norm();
        if !len.is_finite() {
            return None;
        }
        let scale = if len > 0.2 { 0.2 / len } else { 1.0 };
        let mut accepted = false;
        let mut lam = scale;
        for _ in 0..8 {
            let c: Vec<f64> = x.coords.iter().zip(step.iter()).map(|(a, d)| a - lam * d).collect();
            if let Ok(y) = crate::manifold::point_from_chart(x.space, x.chart, c) {
                let y = y.canonical();
                if let Ok(w) = field.evaluate(&y) {
                    if norm(&w) < norm(&v) {
                        x = y;
                        v = w;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm(&v) <= tol).then_some(x)
}

/// Newton from every start, keep converged points, merge those closer than 1e-6,
/// classify each. Output is sorted by the canonical coordinates.
pub fn find_rest_points(field: &VectorFieldDef, starts: &[ManifoldPoint], tol: f64) -> Result<Vec<RestPointInfo>> {
    use rayon::prelude::*;
    if let Some(s) = starts.iter().find(|s| s.space != field.space) {
        return Err(Error::SpaceMismatch(s.space.id(), field.space.id()));
    }
    let found: Vec<Option<ManifoldPoint>> = starts.par_iter().map(|s| newton(field, s, tol, 60)).collect();
    let mut uniq: Vec<ManifoldPoint> = Vec::new();
    for p in found.into_iter().flatten() {
        if !uniq.iter().any(|q| distance(q, &p).map(|d| d < 1e-6).unwrap_or(false)) {
            uniq.push(p);
        }
    }
    let mut out = uniq.iter().map(|p| classify(field, p, 1e-8)).collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        let (ea, eb) = (a.point.embed(), b.point.embed());
        ea.iter().zip(&eb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_x2, linear_field_rows};

    #[test]
    fn linear_saddle_has_one_rest_point() {
        let f = linear_field_rows(&[vec![-1.0, 0.5], vec![0.0, 2.0]]).unwrap();
        let starts = census_starts(Space::Euclidean(2), 5, 2.0).unwrap();
        let r = find_rest_points(&f, &starts, 1e-12).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, RestKind::Saddle);
        assert!(norm(&r[0].point.coords) < 1e-12);
    }

    #[test]
    fn x2_has_two_rest_points() {
        let f = build_x2();
        let starts = census_starts(Space::Sphere, 200, 0.0).unwrap();
        let r = find_rest_points(&f, &starts, 1e-12).unwrap();
        let kinds: Vec<RestKind> = r.iter().map(|i| i.kind).collect();
        assert_eq!(r.len(), 2, "{r:?}");
        assert!(kinds.contains(&RestKind::Attracting) && kinds.contains(&RestKind::Repelling));
    }

    #[test]
    fn rest_line_is_nonhyperbolic() {
        let f = crate::fields::rest_line_field();
        let x = ManifoldPoint::euclidean(vec![0.7, 0.0]).unwrap();
        assert_eq!(classify(&f, &x, 1e-8).unwrap().kind, RestKind::Nonhyperbolic);
    }
}
