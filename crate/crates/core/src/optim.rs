//! Small scalar root finder, a derivative-free minimizer and a damped
//! least-squares solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Brent's method on a bracket with f(a)·f(b) ≤ 0.
pub fn brent_root<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::RootFinding(format!("no sign change on [{a}, {b}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::RootFinding(format!("no convergence after {max_iter} iterations")))
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder–Mead with an axis-aligned initial simplex of the given scales.
/// Objective errors are treated as +∞.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], scales: &[f64], max_evals: usize, ftol: f64) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += scales[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (vals[0].abs() + 1e-300) || vals[n] - vals[0] <= ftol * 1e-3 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    vals[i] = eval(&p, &mut evals);
                    pts[i] = p;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b))).unwrap();
    NelderMeadResult { x: pts[best].clone(), value: vals[best], evaluations: evals }
}

#[derive(Clone, Debug)]
pub struct LeastSquaresResult {
    pub x: Vec<f64>,
    /// Half the squared residual norm.
    pub cost: f64,
    pub evaluations: usize,
}

/// Levenberg–Marquardt on a residual map with forward-difference Jacobians
/// (steps `fd`). Residual failures (None) reject the trial step. Each damped
/// step is solved through an SVD of the stacked system, which tolerates
/// Jacobians whose columns differ by many orders of magnitude.
pub fn levenberg_marquardt<F: FnMut(&[f64]) -> Option<Vec<f64>>>(mut r: F, x0: &[f64], fd: &[f64], max_evals: usize) -> Option<LeastSquaresResult> {
    let n = x0.len();
    let mut evals = 1;
    let mut x = x0.to_vec();
    let mut res = r(&x)?;
    let cost_of = |v: &[f64]| 0.5 * v.iter().map(|a| a * a).sum::<f64>();
    let mut cost = cost_of(&res);
    let mut lambda: f64 = 1e-3;
    while evals + n < max_evals && cost > 0.0 {
        let m = res.len();
        let mut jac = DMatrix::zeros(m, n);
        for i in 0..n {
            let mut xi = x.clone();
            xi[i] += fd[i];
            let ri = r(&xi)?;
            evals += 1;
            for k in 0..m {
                jac[(k, i)] = (ri[k] - res[k]) / fd[i];
            }
        }
        let col_norm: Vec<f64> = (0..n).map(|i| jac.column(i).norm().max(1e-300)).collect();
        let mut improved = false;
        while evals < max_evals && lambda < 1e16 {
            let mut a = DMatrix::zeros(m + n, n);
            a.view_mut((0, 0), (m, n)).copy_from(&jac);
            for i in 0..n {
                a[(m + i, i)] = lambda.sqrt() * col_norm[i];
            }
            let mut b = DVector::zeros(m + n);
            for k in 0..m {
                b[k] = -res[k];
            }
            let step = a.svd(true, true).solve(&b, 1e-15).ok()?;
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            evals += 1;
            match r(&trial) {
                Some(rt) if cost_of(&rt) < cost => {
                    let gain = cost - cost_of(&rt);
                    x = trial;
                    res = rt;
                    cost -= gain;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if gain <= 1e-15 * cost {
                        return Some(LeastSquaresResult { x, cost, evaluations: evals });
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    Some(LeastSquaresResult { x, cost, evaluations: evals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cos_root() {
        let r = brent_root(|x| Ok(x.cos() - x), 0.0, 1.0, 1e-14, 100).unwrap();
        assert!((r - 0.7390851332151607).abs() < 1e-13);
    }

    #[test]
    fn brent_needs_bracket() {
        assert!(brent_root(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 50).is_err());
    }

    #[test]
    fn lm_fits_badly_scaled_exponentials() {
        // y(t) = (a e^{-t}, b e^{t}) sampled on [0, 20]
        let ts: Vec<f64> = (0..=40).map(|k| 0.5 * k as f64).collect();
        let (a, b) = (0.7, 3e-9);
        let r = |x: &[f64]| Some(ts.iter().flat_map(|t| [x[0] * (-t).exp() - a * (-t).exp(), x[1] * t.exp() - b * t.exp()]).collect());
        let out = levenberg_marquardt(r, &[0.0, 0.0], &[1e-6, 1e-6], 200).unwrap();
        assert!((out.x[0] - a).abs() < 1e-12, "{out:?}");
        assert!((out.x[1] - b).abs() < 1e-16 * 1e3, "{out:?}");
    }

    #[test]
    fn lm_rosenbrock_residuals() {
        let r = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = levenberg_marquardt(r, &[-1.2, 1.0], &[1e-7, 1e-7], 2000).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            5000,
            1e-14,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r);
    }
}
