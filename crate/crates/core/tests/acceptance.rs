//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use shadowlab_core::experiments::{
    alpha_check, expansion_table, four_balls, matcher_oracle, orbit_drift, polar_rates, ps_delta, rest_drift, saddle_noise, xstar_verify,
    AlphaConfig, BallsConfig, Check, Checked, OracleConfig, OrbitDriftConfig, PolarConfig, PsDeltaConfig, RestDriftConfig, SaddleConfig,
    XStarVerifyConfig,
};
use shadowlab_core::Result;

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
}

fn summary(checks: &[&Check]) -> String {
    checks.iter().map(|c| format!("{} {:.4e}", c.name, c.value)).collect::<Vec<_>>().join(", ")
}

fn report(c: &Criterion, elapsed: Duration, outcome: Result<Vec<Check>>) -> bool {
    let (ok, detail) = match outcome {
        Ok(checks) => {
            let failed: Vec<&Check> = checks.iter().filter(|k| !k.passed).collect();
            if failed.is_empty() {
                (true, summary(&checks.iter().collect::<Vec<_>>()))
            } else {
                (false, format!("failed: {}", summary(&failed)))
            }
        }
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed <= c.limit;
    let pass = ok && in_time;
    let time_note = if in_time { String::new() } else { format!(" (over the {:?} limit)", c.limit) };
    println!(
        "[{}] {:>2} {} ({:.2?}{}) {}",
        if pass { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        elapsed,
        time_note,
        detail
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

fn checks_of<R: Checked>(r: Result<R>) -> Result<Vec<Check>> {
    r.map(|r| r.checks().to_vec())
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;

    let (xv, t) = timed(|| xstar_verify(&XStarVerifyConfig::default()));
    let (spectral, census): (Result<Vec<Check>>, Result<Vec<Check>>) = match xv {
        Ok(r) => {
            let (a, b) = r.checks().iter().cloned().partition(|c| c.name.starts_with("spectrum"));
            (Ok(a), Ok(b))
        }
        Err(e) => (Err(shadowlab_core::Error::InvalidArgument(e.to_string())), Err(e)),
    };
    all &= report(&Criterion { id: 1, name: "saddle spectra of the gluing field", limit: secs(1) }, t, spectral);
    all &= report(&Criterion { id: 2, name: "rest point census, dr1/dt > 0, seam continuity", limit: secs(60) }, t, census);

    let (r, t) = timed(|| checks_of(alpha_check(&AlphaConfig::default())));
    all &= report(&Criterion { id: 3, name: "nontransverse connection", limit: secs(10) }, t, r);

    let (r, t) = timed(|| checks_of(rest_drift(&RestDriftConfig::default())));
    all &= report(&Criterion { id: 4, name: "drift along a rest line is not shadowed", limit: secs(60) }, t, r);

    let (r, t) = timed(|| checks_of(orbit_drift(&OrbitDriftConfig::default())));
    all &= report(&Criterion { id: 5, name: "drift near a neutral closed orbit is not shadowed", limit: secs(60) }, t, r);

    let (r, t) = timed(|| checks_of(saddle_noise(&SaddleConfig::default())));
    all &= report(&Criterion { id: 6, name: "noisy saddle pseudotrajectories are shadowed", limit: secs(60) }, t, r);

    let (r, t) = timed(|| checks_of(matcher_oracle(&OracleConfig::default())));
    all &= report(&Criterion { id: 7, name: "DP matcher agrees with brute force", limit: secs(10) }, t, r);

    let (r, t) = timed(|| checks_of(four_balls(&BallsConfig::default())));
    all &= report(&Criterion { id: 8, name: "orbit through four balls in order", limit: secs(300) }, t, r);

    let (r, t) = timed(|| checks_of(ps_delta(&PsDeltaConfig::default())));
    all &= report(&Criterion { id: 9, name: "Ps(delta) pseudotrajectories are oriented-shadowed", limit: secs(600) }, t, r);

    let (r, t) = timed(|| checks_of(polar_rates(&PolarConfig::default())));
    all &= report(&Criterion { id: 10, name: "polar rates near p*", limit: secs(60) }, t, r);

    let (r, t) = timed(|| checks_of(expansion_table()));
    all &= report(&Criterion { id: 11, name: "expansion predicate table", limit: Duration::from_millis(1) }, t, r);

    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria FAILED" });
    if !all {
        std::process::exit(1);
    }
}
