use serde::{Deserialize, Serialize};

use super::{Pseudotrajectory, Segment};
use crate::error::{invalid, Error, Result};
use crate::field::VectorFieldDef;
use crate::fields::rest_line_field;
use crate::integrator::{integrate, IntegratorConfig};
use crate::manifold::{distance, ManifoldPoint, Space};
use crate::poincare::{poincare_map, section_crossing, AlphaData, Direction, TransverseSection};

/// Staircase drift across the rest line of diag(0, −1): y climbs from −2ε to
/// 2ε by 1/m per unit time, z = 0, in frozen unit segments starting at t = 0.
pub fn lemma1_rest_pseudo(eps: f64, m: f64) -> Result<(VectorFieldDef, Pseudotrajectory)> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("eps = {eps} must lie in (0, 0.5) so that [−2ε, 2ε] stays in the unit chart"));
    }
    if !(m >= 1.0) || !m.is_finite() {
        return invalid(format!("m = {m} must be at least 1"));
    }
    let field = rest_line_field();
    let steps = (4.0 * m * eps - 1e-9).ceil() as usize;
    let segs = (0..=steps)
        .map(|k| {
            let y = (-2.0 * eps + k as f64 / m).min(2.0 * eps);
            Ok(Segment::frozen(k as f64, ManifoldPoint::euclidean(vec![y, 0.0])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let g = Pseudotrajectory::new(&field, segs, (-5.0, steps as f64 + 5.0), 1.0)?;
    Ok((field, g))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitPseudo {
    pub pseudo: Pseudotrajectory,
    /// Section coordinates (s, v) of the anchors.
    pub anchors_u: Vec<Vec<f64>>,
    pub return_times: Vec<f64>,
}

/// Slow outward drift in the transverse block of a closed orbit. The section
/// coordinates are read as (s, v): the anchors are the section points
/// (0, (k/N) Q^k v₀), k = 0..N, with Q^k v₀ obtained by iterating the computed
/// return map from (0, v₀), and each segment lasts the return time of its anchor.
pub fn lemma1_orbit_pseudo(
    field: &VectorFieldDef,
    section: &TransverseSection,
    v0: &[f64],
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<OrbitPseudo> {
    if n == 0 {
        return invalid("N must be positive");
    }
    if v0.len() + 1 != section.frame.len() {
        return Err(Error::Dimension { expected: section.frame.len() - 1, got: v0.len() });
    }
    let with_s0 = |v: &[f64]| std::iter::once(0.0).chain(v.iter().copied()).collect::<Vec<f64>>();
    let cap = 1e3;
    // Q^k v₀ along the exact orbit of (0, v₀)
    let mut orbit_v = vec![v0.to_vec()];
    let mut u = with_s0(v0);
    for _ in 0..n {
        u = poincare_map(field, section, section, &u, Direction::Forward, cap, cfg)?.u;
        orbit_v.push(u[1..].to_vec());
    }
    let mut segs = Vec::with_capacity(n + 1);
    let mut anchors_u = Vec::with_capacity(n + 1);
    let mut return_times = Vec::with_capacity(n);
    let mut tau = 0.0;
    for (k, v) in orbit_v.iter().enumerate() {
        let scale = k as f64 / n as f64;
        let uk = with_s0(&v.iter().map(|x| scale * x).collect::<Vec<f64>>());
        let anchor = section.point(&uk)?;
        segs.push(Segment::frozen(tau, anchor.clone()));
        anchors_u.push(uk);
        if k < n {
            let hit = section_crossing(field, section, &anchor, Direction::Forward, cap, 1e-6, cfg)?;
            return_times.push(hit.t);
            tau += hit.t;
        }
    }
    let max_len = return_times.iter().copied().fold(0.0, f64::max).max(1e-9);
    let pseudo = Pseudotrajectory::new(field, segs, (-5.0, tau + 5.0), max_len)?;
    Ok(OrbitPseudo { pseudo, anchors_u, return_times })
}

/// Two exact pieces around the linear saddle chart (y; v, w): the orbit of r
/// up to t = 0, then the orbit of α_T = r + a e^{−λT} e_v.
pub fn case_b1_pseudo(field: &VectorFieldDef, r: &ManifoldPoint, a: f64, lambda: f64, big_t: f64) -> Result<Pseudotrajectory> {
    if !matches!(r.space, Space::Euclidean(n) if n >= 2) {
        return invalid("case B1 needs a Euclidean chart with a v coordinate");
    }
    if !(a > 0.0 && lambda > 0.0 && big_t >= 0.0) {
        return invalid(format!("need a > 0, λ > 0, T ≥ 0 (got {a}, {lambda}, {big_t})"));
    }
    let mut c = r.coords.clone();
    c[1] += a * (-lambda * big_t).exp();
    if c[1] == r.coords[1] {
        return invalid(format!("jump a·e^(−λT) underflows at T = {big_t}"));
    }
    let alpha_t = ManifoldPoint::euclidean(c)?;
    let window = (-5.0, big_t + 2.0);
    let segs = vec![Segment { tau: window.0, anchor_t: 0.0, anchor: r.clone() }, Segment { tau: 0.0, anchor_t: 0.0, anchor: alpha_t }];
    Pseudotrajectory::new(field, segs, window, window.1 - window.0)
}

/// Type Ps(δ): φ(t − T_q, x_q) before T_q, α(t) on [T_q, T_p], φ(t − T_p, x_p)
/// after T_p; x_q, x_p must lie within δ of α(T_q), α(T_p).
#[allow(clippy::too_many_arguments)]
pub fn ps_delta_pseudo(
    field: &VectorFieldDef,
    alpha: &AlphaData,
    t_q: f64,
    t_p: f64,
    x_q: &ManifoldPoint,
    x_p: &ManifoldPoint,
    delta: f64,
    cfg: &IntegratorConfig,
) -> Result<Pseudotrajectory> {
    if !(t_q < t_p) {
        return invalid(format!("need T_q < T_p (got {t_q}, {t_p})"));
    }
    if !(delta > 0.0) {
        return invalid("δ must be positive");
    }
    let y_q = integrate(field, &alpha.origin, t_q, cfg)?;
    let y_p = integrate(field, &alpha.origin, t_p, cfg)?;
    for (name, x, y) in [("x_q", x_q, &y_q), ("x_p", x_p, &y_p)] {
        let d = distance(x, y)?;
        if d > delta {
            return invalid(format!("{name} is {d} away from α, more than δ = {delta}"));
        }
    }
    let span = t_p - t_q;
    let window = (t_q - 0.5 * span - 10.0, t_p + 0.5 * span + 10.0);
    let segs = vec![
        Segment { tau: window.0, anchor_t: t_q, anchor: x_q.clone() },
        Segment { tau: t_q, anchor_t: 0.0, anchor: alpha.origin.clone() },
        Segment { tau: t_p, anchor_t: t_p, anchor: x_p.clone() },
    ];
    Pseudotrajectory::new(field, segs, window, window.1 - window.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    /// z₂ = φ(τ, z₂′).
    pub tau: f64,
    pub z2_prime: ManifoldPoint,
    /// |z₂′ − z₁|.
    pub displacement: f64,
}

/// Writes z₂ near z₁ ∈ Σ as φ(τ, z₂′) with z₂′ ∈ Σ, using the section hit of
/// the orbit of z₂ closest in time (|t| ≤ cap).
pub fn local_estimate_check(
    field: &VectorFieldDef,
    section: &TransverseSection,
    z1: &ManifoldPoint,
    z2: &ManifoldPoint,
    delta: f64,
    cap: f64,
    cfg: &IntegratorConfig,
) -> Result<LocalEstimate> {
    let on = section.normal_coord(z1).map(|s| s.abs() <= 1e-9).unwrap_or(false);
    if !on || !section.in_disk(&section.coords(z1)?) {
        return invalid("z₁ must lie on the section disk");
    }
    let d = distance(z1, z2)?;
    if !(d < delta) {
        return invalid(format!("|z₂ − z₁| = {d} is not below δ = {delta}"));
    }
    if section.normal_coord(z2).is_some_and(|s| s == 0.0) && section.in_disk(&section.coords(z2)?) {
        return Ok(LocalEstimate { tau: 0.0, z2_prime: z2.clone(), displacement: d });
    }
    let fwd = section_crossing(field, section, z2, Direction::Forward, cap, 0.0, cfg);
    let bwd = section_crossing(field, section, z2, Direction::Backward, cap, 0.0, cfg);
    let hit = match (fwd, bwd) {
        (Ok(a), Ok(b)) => {
            if a.t.abs() <= b.t.abs() {
                a
            } else {
                b
            }
        }
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => a,
        (Err(e), Err(_)) => return Err(e),
    };
    let displacement = distance(&hit.point, z1)?;
    Ok(LocalEstimate { tau: -hit.t, z2_prime: hit.point, displacement })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{closed_orbit_field, linear_field_rows};
    use crate::pseudo::verify_pseudo;

    #[test]
    fn rest_pseudo_shape() {
        let cfg = IntegratorConfig::default();
        let (f, g) = lemma1_rest_pseudo(0.1, 100.0).unwrap();
        let p0 = g.evaluate(&f, 0.0, &cfg).unwrap();
        let p1 = g.evaluate(&f, 40.0, &cfg).unwrap();
        assert!((p0.coords[0] + 0.2).abs() < 1e-15 && p0.coords[1] == 0.0);
        assert!((p1.coords[0] - 0.2).abs() < 1e-12);
        assert_eq!(g.evaluate(&f, -3.0, &cfg).unwrap().coords, vec![-0.2, 0.0]);
        assert!((g.evaluate(&f, 100.0, &cfg).unwrap().coords[0] - 0.2).abs() < 1e-12);
        let r = verify_pseudo(&f, &g, 0.1, 0.05, &cfg).unwrap();
        // each unit step moves y by exactly 1/m
        assert!((r.sup_defect - 0.01).abs() < 0.001, "{r:?}");
        assert!(lemma1_rest_pseudo(0.6, 100.0).is_err());
        assert!(lemma1_rest_pseudo(0.1, 0.5).is_err());
        assert!(lemma1_rest_pseudo(-0.1, 10.0).is_err());
    }

    fn orbit_section(f: &VectorFieldDef) -> TransverseSection {
        let e = |k: usize| (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        TransverseSection::with_frame(f, ManifoldPoint::euclidean(vec![1.0, 0.0, 0.0, 0.0]).unwrap(), &e(1), vec![e(0), e(2), e(3)], 0.5).unwrap()
    }

    #[test]
    fn orbit_pseudo_anchor_gaps() {
        let f = closed_orbit_field(0.1);
        let sec = orbit_section(&f);
        let cfg = IntegratorConfig::with_tol(1e-11);
        let op = lemma1_orbit_pseudo(&f, &sec, &[0.2, 0.0], 10, &cfg).unwrap();
        let vn = |u: &[f64]| u[1].hypot(u[2]);
        assert_eq!(vn(&op.anchors_u[0]), 0.0);
        assert!((vn(&op.anchors_u[10]) - 0.2).abs() < 1e-8);
        let jumps = op.pseudo.jumps(&f, &cfg).unwrap();
        assert_eq!(jumps.len(), 10);
        for (_, j) in jumps {
            assert!((j - 0.02).abs() < 1e-7, "{j}");
        }
        assert!(op.return_times.iter().all(|t| (t - std::f64::consts::TAU).abs() < 1e-7));
    }

    #[test]
    fn case_b1_jump_and_defect() {
        let f = linear_field_rows(&[vec![-1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let r = ManifoldPoint::euclidean(vec![0.5, 0.0, 0.0]).unwrap();
        let cfg = IntegratorConfig::default();
        let g = case_b1_pseudo(&f, &r, 0.1, 1.0, 7.0).unwrap();
        let j = g.jumps(&f, &cfg).unwrap();
        assert!((j[0].1 - 0.1 * (-7.0f64).exp()).abs() < 1e-12);
        let rep = verify_pseudo(&f, &g, 0.1, 0.05, &cfg).unwrap();
        assert!(rep.sup_defect <= 1e-3);
        // the branch before the jump is exact; |y| ≤ 0.5e³ there and the tolerance is relative
        let head = Pseudotrajectory::new(&f, vec![g.segments()[0].clone()], (-3.0, -1.0), 10.0).unwrap();
        assert!(verify_pseudo(&f, &head, 0.1, 0.05, &cfg).unwrap().sup_defect < 1e-8 * 0.5 * 3f64.exp());
        assert!(case_b1_pseudo(&f, &r, 0.1, 1.0, 800.0).is_err());
    }

    #[test]
    fn local_estimate_trivial_cases() {
        let f = closed_orbit_field(0.1);
        let sec = orbit_section(&f);
        let cfg = IntegratorConfig::with_tol(1e-12);
        let z1 = sec.point(&[0.01, 0.05, 0.0]).unwrap();
        let same = local_estimate_check(&f, &sec, &z1, &z1, 1e-3, 1.0, &cfg).unwrap();
        assert_eq!(same.tau, 0.0);
        assert_eq!(same.displacement, 0.0);
        let z2 = integrate(&f, &z1, 5e-4, &cfg).unwrap();
        let le = local_estimate_check(&f, &sec, &z1, &z2, 1e-3, 1.0, &cfg).unwrap();
        assert!((le.tau - 5e-4).abs() < 1e-10);
        assert!(le.displacement < 1e-10);
        let far = ManifoldPoint::euclidean(vec![-1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(local_estimate_check(&f, &sec, &z1, &far, 1e-3, 1.0, &cfg).is_err());
    }
}
