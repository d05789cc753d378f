//! Central-difference Jacobians in the chart of the base point.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::manifold::{ManifoldPoint, SphereChart};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianEstimate {
    pub base: ManifoldPoint,
    /// Row-major: matrix[i][j] = ∂X_i/∂x_j.
    pub matrix: Vec<Vec<f64>>,
    pub step: f64,
}

impl JacobianEstimate {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.matrix.len();
        DMatrix::from_fn(n, n, |i, j| self.matrix[i][j])
    }

    /// Eigenvalues sorted by real part, then imaginary part.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        eigenvalues(&self.to_dmatrix())
    }
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

pub fn jacobian(field: &VectorFieldDef, x: &ManifoldPoint, step: f64) -> Result<JacobianEstimate> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let n = x.dim();
    // band radii must stay inside [−1, 1]
    for (k, f) in x.chart.factors().into_iter().enumerate() {
        if f == SphereChart::Band && x.coords[2 * k].abs() + step > 1.0 {
            return Err(Error::OutsideChart { chart: x.chart.name(), coords: x.coords.clone() });
        }
    }
    let mut m = vec![vec![0.0; n]; n];
    let mut xp = x.coords.clone();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        xp[j] = x.coords[j] + step;
        field.eval_coords(x.chart, &xp, &mut fp)?;
        xp[j] = x.coords[j] - step;
        field.eval_coords(x.chart, &xp, &mut fm)?;
        xp[j] = x.coords[j];
        for i in 0..n {
            m[i][j] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(JacobianEstimate { base: x.clone(), matrix: m, step })
}

/// Largest spectral norm of the Jacobian over the given points: a sampled
/// Lipschitz constant of the field in chart coordinates.
pub fn lipschitz_bound(field: &VectorFieldDef, points: &[ManifoldPoint], step: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for p in points {
        let j = jacobian(field, p, step)?.to_dmatrix();
        best = best.max(j.singular_values().max());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Space;

    #[test]
    fn linear_field_is_recovered() {
        let a = [[0.5, -1.0, 2.0], [0.0, 3.0, -0.25], [1.5, 0.0, -2.0]];
        let f = VectorFieldDef::new("lin", Space::Euclidean(3), "", move |_, x, out| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
            Ok(())
        });
        let x = ManifoldPoint::euclidean(vec![0.3, -0.1, 2.0]).unwrap();
        let j = jacobian(&f, &x, 1e-4).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert!((j.matrix[i][k] - a[i][k]).abs() < 10.0 * 1e-4);
            }
        }
    }

    #[test]
    fn eigenvalues_of_spiral_block() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]);
        let ev = eigenvalues(&m);
        assert!((ev[0] - Complex::new(1.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - Complex::new(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_step_across_band_edge() {
        let f = VectorFieldDef::new("zero", Space::Sphere, "", |_, _, out| {
            out.fill(0.0);
            Ok(())
        });
        let x = ManifoldPoint::new(Space::Sphere, crate::manifold::Chart::Sphere(SphereChart::Band), vec![1.0, 0.0]).unwrap();
        assert!(jacobian(&f, &x, 1e-5).is_err());
    }
}
