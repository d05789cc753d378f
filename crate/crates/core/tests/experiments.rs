use shadowlab_core::experiments::{
    case_b1, expansion_table, matcher_oracle, noisy_saddle_pseudo, orbit_drift, ps_delta, rest_drift, saddle_noise, three_balls, BallsConfig,
    CaseB1Config, Checked, OracleConfig, OrbitDriftConfig, Outcome, PsDeltaConfig, RestDriftConfig, SaddleConfig,
};
use shadowlab_core::fields::linear_field_rows;
use shadowlab_core::integrator::IntegratorConfig;
use shadowlab_core::pseudo::verify_pseudo;

fn roundtrip<T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug + Default>() {
    let d = T::default();
    let json = serde_json::to_string(&d).unwrap();
    assert_eq!(serde_json::from_str::<T>(&json).unwrap(), d);
    assert_eq!(serde_json::from_str::<T>("{}").unwrap(), d);
}

#[test]
fn configs_roundtrip_and_fill_defaults() {
    roundtrip::<RestDriftConfig>();
    roundtrip::<OrbitDriftConfig>();
    roundtrip::<CaseB1Config>();
    roundtrip::<OracleConfig>();
    roundtrip::<SaddleConfig>();
    roundtrip::<BallsConfig>();
    roundtrip::<PsDeltaConfig>();
}

#[test]
fn unknown_config_fields_are_rejected() {
    assert!(serde_json::from_str::<RestDriftConfig>(r#"{"epsilon": 0.1}"#).is_err());
    assert!(serde_json::from_str::<PsDeltaConfig>(r#"{"delta": 1e-3, "draw": 3}"#).is_err());
    let c: PsDeltaConfig = serde_json::from_str(r#"{"delta": 1e-3, "draws": 3}"#).unwrap();
    assert_eq!(c.draws, 3);
}

#[test]
fn validation_lists_every_bad_field() {
    let cfg = RestDriftConfig { eps: -1.0, m: 0.0, t_step: 0.0, ..Default::default() };
    let e = rest_drift(&cfg).unwrap_err().to_string();
    for field in ["eps", "m:", "t_step"] {
        assert!(e.contains(field), "{e}");
    }
    let cfg = OrbitDriftConfig { a: 2.0, n: 0, ..Default::default() };
    let e = orbit_drift(&cfg).unwrap_err().to_string();
    assert!(e.contains("a:") && e.contains("n:"), "{e}");
    let cfg = PsDeltaConfig { delta: 0.0, draws: 0, ..Default::default() };
    let e = ps_delta(&cfg).unwrap_err().to_string();
    assert!(e.contains("delta") && e.contains("draws"), "{e}");
}

#[test]
fn expansion_table_and_oracle_pass() {
    let t = expansion_table().unwrap();
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.outcome(), Outcome::Passed);
    let o = matcher_oracle(&OracleConfig::default()).unwrap();
    assert_eq!(o.agreements, o.trials);
    assert_eq!(o.outcome(), Outcome::Passed);
}

#[test]
fn oracle_is_reproducible() {
    let cfg = OracleConfig { trials: 20, ..Default::default() };
    let a = serde_json::to_string(&matcher_oracle(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&matcher_oracle(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn case_b1_and_orbit_drift_pass() {
    let r = case_b1(&CaseB1Config::default()).unwrap();
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
    let r = orbit_drift(&OrbitDriftConfig { n: 20, probe_returns: 20, ..Default::default() }).unwrap();
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
    assert!((r.end_norm - r.start_norm - 0.2).abs() < 1e-8);
}

#[test]
fn small_rest_drift_is_not_shadowed() {
    let r = rest_drift(&RestDriftConfig { m: 100.0, defect_bound: 0.02, seed_grid: 12, ..Default::default() }).unwrap();
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
}

#[test]
fn noisy_saddle_pseudo_has_small_defect() {
    let g = noisy_saddle_pseudo(1e-3, 1.0 / 12.0, 20.0, 17).unwrap();
    let f = linear_field_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let r = verify_pseudo(&f, &g, 0.1, 0.05, &IntegratorConfig::default()).unwrap();
    assert!(r.sup_defect < 1e-3);
    let other = noisy_saddle_pseudo(1e-3, 1.0 / 12.0, 20.0, 18).unwrap();
    assert_ne!(g.segments(), other.segments());
}

#[test]
fn saddle_noise_single_defect() {
    let r = saddle_noise(&SaddleConfig { defects: vec![1e-3], ..Default::default() }).unwrap();
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
}

#[test]
fn three_balls_within_budget() {
    let r = three_balls(&BallsConfig::default()).unwrap();
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
    assert_eq!(r.balls, 3);
}

#[test]
fn one_ps_delta_draw() {
    let r = ps_delta(&PsDeltaConfig { draws: 1, ..Default::default() }).unwrap();
    assert_eq!(r.draws.len(), 1);
    assert_eq!(r.outcome(), Outcome::Passed, "{:?}", r.failures());
}
