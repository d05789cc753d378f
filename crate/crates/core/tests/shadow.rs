use shadowlab_core::field::VectorFieldDef;
use shadowlab_core::fields::linear_field_rows;
use shadowlab_core::integrator::{integrate, IntegratorConfig};
use shadowlab_core::manifold::ManifoldPoint;
use shadowlab_core::pseudo::{lemma1_rest_pseudo, Pseudotrajectory, Segment};
use shadowlab_core::shadow::{
    match_oriented, match_orbital, match_standard, match_with_mode, rep_class_check, Mode, ShadowOptions,
};

fn rotation() -> VectorFieldDef {
    linear_field_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()
}

fn polar(r: f64, a: f64) -> ManifoldPoint {
    ManifoldPoint::euclidean(vec![r * a.cos(), r * a.sin()]).unwrap()
}

/// Runs the circle at twice the speed of the flow: each frozen segment of
/// length `len` starts where the orbit is at twice its start time.
fn dilated(f: &VectorFieldDef, len: f64, end: f64) -> Pseudotrajectory {
    let cfg = IntegratorConfig::with_tol(1e-12);
    let x = polar(1.0, 0.0);
    let n = (end / len).round() as usize;
    let segs = (0..n).map(|k| Segment::frozen(k as f64 * len, integrate(f, &x, 2.0 * k as f64 * len, &cfg).unwrap())).collect();
    Pseudotrajectory::new(f, segs, (0.0, end), len).unwrap()
}

/// Unit-speed rotation whose radius creeps out by `step` every half time unit.
fn creeping(f: &VectorFieldDef, step: f64, end: f64) -> Pseudotrajectory {
    let n = (end / 0.5).round() as usize;
    let segs = (0..n).map(|k| Segment::frozen(0.5 * k as f64, polar(1.0 + step * k as f64, 0.5 * k as f64))).collect();
    Pseudotrajectory::new(f, segs, (0.0, end), 0.5).unwrap()
}

#[test]
fn average_slope_two_is_oriented_but_not_standard() {
    let f = rotation();
    let g = dilated(&f, 0.1, 5.0);
    let cfg = IntegratorConfig::default();
    let opts = ShadowOptions { seed_grid: 5, nm_evals: 60, pad: Some(12.0), ..Default::default() };
    let oriented = match_oriented(&f, &g, 0.1, &opts, &cfg).unwrap();
    assert!(oriented.found, "{}", oriented.distance);
    let h = oriented.reparametrization.as_ref().unwrap();
    let (s0, h0) = h.breakpoints()[0];
    let (s1, h1) = *h.breakpoints().last().unwrap();
    let slope = (h1 - h0) / (s1 - s0);
    assert!((slope - 2.0).abs() < 0.1, "average slope {slope}");
    assert!(!rep_class_check(h, 0.1).unwrap());

    let standard = match_standard(&f, &g, 0.1, &opts, &cfg).unwrap();
    assert!(!standard.found);
    assert!(standard.distance > 0.1);
}

#[test]
fn mode_hierarchy_on_found_reports() {
    let f = rotation();
    let g = creeping(&f, 0.002, 10.0);
    let cfg = IntegratorConfig::default();
    let eps = 0.05;
    let opts = ShadowOptions { seed_grid: 7, nm_evals: 60, ..Default::default() };
    let standard = match_standard(&f, &g, eps, &opts, &cfg).unwrap();
    assert!(standard.found, "{}", standard.distance);
    let h = standard.reparametrization.as_ref().unwrap();
    assert!(rep_class_check(h, eps).unwrap());

    // the standard witness alone must also be an oriented witness
    let only = |seed: &ManifoldPoint| ShadowOptions { seed_grid: 0, nm_evals: 0, polish_evals: 0, extra_seeds: vec![seed.clone()], ..Default::default() };
    let seed = standard.seed.clone().unwrap();
    let oriented = match_oriented(&f, &g, eps, &only(&seed), &cfg).unwrap();
    assert!(oriented.found);
    assert!(oriented.distance <= standard.distance + 1e-12);

    let orbital = match_orbital(&f, &g, eps, &only(&oriented.seed.clone().unwrap()), &cfg).unwrap();
    assert!(orbital.found);
    assert!(orbital.distance <= oriented.distance, "{} > {}", orbital.distance, oriented.distance);
}

#[test]
fn standard_witnesses_are_in_the_rep_class() {
    let f = rotation();
    let cfg = IntegratorConfig::default();
    for (step, eps) in [(0.0, 0.02), (0.001, 0.05), (0.003, 0.1)] {
        let g = creeping(&f, step, 6.0);
        let opts = ShadowOptions { seed_grid: 5, nm_evals: 40, tau_step: 0.1, t_step: 0.02, ..Default::default() };
        let r = match_standard(&f, &g, eps, &opts, &cfg).unwrap();
        if let Some(h) = &r.reparametrization {
            assert!(rep_class_check(h, eps).unwrap(), "{:?}", h.slopes());
        }
        assert!(r.found, "step {step}: {}", r.distance);
    }
}

#[test]
fn reports_are_deterministic() {
    let f = rotation();
    let g = creeping(&f, 0.002, 6.0);
    let cfg = IntegratorConfig::default();
    let opts = ShadowOptions { seed_grid: 5, nm_evals: 40, ..Default::default() };
    for mode in [Mode::Standard, Mode::Oriented, Mode::Orbital] {
        let a = serde_json::to_string(&match_with_mode(mode, &f, &g, 0.05, &opts, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&match_with_mode(mode, &f, &g, 0.05, &opts, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn rest_line_drift_is_not_oriented_shadowed() {
    let (f, g) = lemma1_rest_pseudo(0.1, 100.0).unwrap();
    let cfg = IntegratorConfig::default();
    let opts = ShadowOptions { seed_grid: 10, nm_evals: 100, seed_time: Some(g.window.0), seed_radius: Some(0.45), ..Default::default() };
    let r = match_oriented(&f, &g, 0.09, &opts, &cfg).unwrap();
    assert!(!r.found);
    // an orbit stays on (or converges to) one point of the line, the drift covers [−0.2, 0.2]
    assert!(r.distance >= 0.2 - 0.01, "{}", r.distance);
}

#[test]
fn bad_inputs_are_rejected() {
    let f = rotation();
    let g = creeping(&f, 0.0, 2.0);
    let cfg = IntegratorConfig::default();
    assert!(match_oriented(&f, &g, 0.0, &ShadowOptions::default(), &cfg).is_err());
    let bad = ShadowOptions { t_step: -1.0, ..Default::default() };
    assert!(match_standard(&f, &g, 0.1, &bad, &cfg).is_err());
    let other = linear_field_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    assert!(match_orbital(&other, &g, 0.1, &ShadowOptions::default(), &cfg).is_err());
}
