//! Concrete vector fields: linear test fields, the two nonhyperbolic fields of
//! the rest-point and closed-orbit obstructions, and the field X* on S² × S².

mod census;
mod descriptor;
mod rho1;
mod sphere_fields;
mod xstar;

pub use census::{census_starts, classify, find_rest_points, RestKind, RestPointInfo};
pub use descriptor::{BlendRadius, FieldDescriptor};
pub use rho1::{rho1_estimate, unit_ball_grid, FieldPair};
pub use sphere_fields::{build_x1, build_x2, build_x2_rotated, latitude_map, x1_band, x1_eval, x2_eval, X2_LINEAR_RADIUS};
pub use xstar::{build_fstar, build_xstar, FStar, GFuncs, GValues, XStarParams, XStarSystem};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::manifold::Space;

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// ẋ = A x on R^n.
pub fn linear_field(a: &DMatrix<f64>) -> Result<VectorFieldDef> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("matrix must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let a = a.clone();
    Ok(VectorFieldDef::new(format!("linear{n}"), Space::Euclidean(n), "linear, C^inf", move |_, x, out| {
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[(i, j)] * x[j];
            }
            out[i] = s;
        }
        Ok(())
    }))
}

pub fn linear_field_rows(rows: &[Vec<f64>]) -> Result<VectorFieldDef> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix rows must all have length n".into()));
    }
    linear_field(&DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// The plane field diag(0, −1): a line of nonhyperbolic rest points.
pub fn rest_line_field() -> VectorFieldDef {
    let f = linear_field(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0])).unwrap();
    VectorFieldDef { name: "rest_line".into(), ..f }
}

/// Field on R⁴ = (x₁, x₂, v₁, v₂) with the closed orbit |x| = 1, v = 0:
/// ẋ = J x + (1 − |x|²) x / 2, v̇ = ω J v. Return time to {x₂ = 0, x₁ > 0}
/// is 2π; the return map rotates v by 2πω and preserves |v|.
pub fn closed_orbit_field(omega: f64) -> VectorFieldDef {
    VectorFieldDef::new("closed_orbit", Space::Euclidean(4), "polynomial, C^inf", move |_, y, out| {
        let s = 0.5 * (1.0 - y[0] * y[0] - y[1] * y[1]);
        out[0] = -y[1] + s * y[0];
        out[1] = y[0] + s * y[1];
        out[2] = -omega * y[3];
        out[3] = omega * y[2];
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::evaluate_field;
    use crate::integrator::{integrate, IntegratorConfig};
    use crate::manifold::ManifoldPoint;

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        for &t in &[0.1, 0.37, 0.8] {
            let fd = (smoothstep(t + 1e-6) - smoothstep(t - 1e-6)) / 2e-6;
            assert!((fd - smoothstep_deriv(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn linear_examples() {
        let f = linear_field(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0])).unwrap();
        let x = ManifoldPoint::euclidean(vec![1.0, 1.0]).unwrap();
        assert_eq!(evaluate_field(&f, &x).unwrap(), vec![-1.0, -2.0]);
        let z = linear_field(&DMatrix::zeros(3, 3)).unwrap();
        let y = ManifoldPoint::euclidean(vec![0.3, -2.0, 5.0]).unwrap();
        assert_eq!(evaluate_field(&z, &y).unwrap(), vec![0.0; 3]);
        assert!(linear_field(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn closed_orbit_has_period_two_pi() {
        let f = closed_orbit_field(0.1);
        let x = ManifoldPoint::euclidean(vec![1.0, 0.0, 0.2, 0.0]).unwrap();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let y = integrate(&f, &x, std::f64::consts::TAU, &cfg).unwrap();
        let ang = std::f64::consts::TAU * 0.1;
        assert!((y.coords[0] - 1.0).abs() < 1e-8 && y.coords[1].abs() < 1e-8);
        assert!((y.coords[2] - 0.2 * ang.cos()).abs() < 1e-8);
        assert!((y.coords[3] - 0.2 * ang.sin()).abs() < 1e-8);
    }
}
