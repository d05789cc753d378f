//! Grid lower bound for the C¹ distance ρ₁(X, Y) = sup|X − Y| + sup‖DX − DY‖.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::jacobian::jacobian;
use crate::manifold::ManifoldPoint;

#[derive(Clone, Debug)]
pub struct FieldPair {
    pub x: VectorFieldDef,
    pub y: VectorFieldDef,
    pub grid: Vec<ManifoldPoint>,
    /// Finite-difference step for the Jacobians.
    pub step: f64,
}

impl FieldPair {
    pub fn new(x: VectorFieldDef, y: VectorFieldDef, grid: Vec<ManifoldPoint>) -> Result<Self> {
        if x.space != y.space {
            return Err(Error::SpaceMismatch(x.space.id(), y.space.id()));
        }
        if let Some(p) = grid.iter().find(|p| p.space != x.space) {
            return Err(Error::SpaceMismatch(p.space.id(), x.space.id()));
        }
        Ok(FieldPair { x, y, grid, step: 1e-5 })
    }
}

/// Max over the grid of |X − Y| plus max of the spectral norm of DX − DY,
/// both in the chart each grid point is given in.
pub fn rho1_estimate(pair: &FieldPair) -> Result<f64> {
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for p in &pair.grid {
        let a = pair.x.evaluate(p)?;
        let b = pair.y.evaluate(p)?;
        c0 = c0.max(a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt());
        let ja = jacobian(&pair.x, p, pair.step)?.to_dmatrix();
        let jb = jacobian(&pair.y, p, pair.step)?.to_dmatrix();
        let d: DMatrix<f64> = ja - jb;
        c1 = c1.max(d.singular_values().max());
    }
    Ok(c0 + c1)
}

/// Cube grid of side `per_dim` on [−1, 1]^n, restricted to the closed unit ball.
pub fn unit_ball_grid(n: usize, per_dim: usize) -> Result<Vec<ManifoldPoint>> {
    let total = per_dim.pow(n as u32);
    let mut out = vec![];
    for mut idx in 0..total {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            c.push(-1.0 + 2.0 * (idx % per_dim) as f64 / (per_dim - 1) as f64);
            idx /= per_dim;
        }
        if c.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12 {
            out.push(ManifoldPoint::euclidean(c)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_x2, linear_field};
    use crate::manifold::{Chart, Space, SphereChart};

    #[test]
    fn identical_fields_are_at_distance_zero() {
        let f = build_x2();
        let grid = (0..20).map(|k| ManifoldPoint::new(Space::Sphere, Chart::Sphere(SphereChart::Band), vec![-0.8 + 0.08 * k as f64, 0.3 * k as f64]).unwrap()).collect();
        assert_eq!(rho1_estimate(&FieldPair::new(f.clone(), f, grid).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn shifted_linear_field() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, 3.0]);
        let eps = 0.01;
        let b = &a + DMatrix::identity(2, 2) * eps;
        let grid = unit_ball_grid(2, 11).unwrap();
        let max_norm = grid.iter().map(|p| p.coords.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let v = rho1_estimate(&FieldPair::new(linear_field(&a).unwrap(), linear_field(&b).unwrap(), grid).unwrap()).unwrap();
        assert!((v - eps * (1.0 + max_norm)).abs() < 1e-9);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = linear_field(&DMatrix::zeros(2, 2)).unwrap();
        let b = linear_field(&DMatrix::zeros(3, 3)).unwrap();
        assert!(FieldPair::new(a, b, vec![]).is_err());
    }
}
