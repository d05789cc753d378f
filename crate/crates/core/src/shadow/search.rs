use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance_matrix, dp_match, hausdorff_embedded, Reparametrization, Steps};
use crate::error::{invalid, Result};
use crate::field::VectorFieldDef;
use crate::integrator::{sample_times, IntegratorConfig};
use crate::manifold::{distance, embedded_distance, point_from_chart, ManifoldPoint};
use crate::optim::{levenberg_marquardt, nelder_mead};
use crate::pseudo::Pseudotrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    Oriented,
    Orbital,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowOptions {
    pub tau_step: f64,
    pub t_step: f64,
    /// Seeds per chart coordinate; the grid is shrunk to fit the budget.
    /// 0 uses the center and the extra seeds only.
    pub seed_grid: usize,
    /// Half-width of the seed cube; default 5ε.
    pub seed_radius: Option<f64>,
    pub budget: usize,
    pub nm_evals: usize,
    /// Residual evaluations for the least-squares polish of the best grid
    /// seed (orbit against pseudo samples at equal times); 0 disables it.
    pub polish_evals: usize,
    /// Pseudo time whose value centers the seed cube; the seed is the orbit
    /// point at that time. Default 0 (clamped into the window).
    pub seed_time: Option<f64>,
    /// Extra orbit time on both sides of the window; default max(2, window/4)
    /// for the matching modes and 0 in orbital mode.
    pub pad: Option<f64>,
    pub extra_seeds: Vec<ManifoldPoint>,
    /// Orbital mode: consecutive samples closer than this are merged; default ε/100.
    pub thin: Option<f64>,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        ShadowOptions {
            tau_step: 0.1,
            t_step: 0.05,
            seed_grid: 20,
            seed_radius: None,
            budget: 10_000,
            nm_evals: 300,
            polish_evals: 200,
            seed_time: None,
            pad: None,
            extra_seeds: vec![],
            thin: None,
        }
    }
}

impl ShadowOptions {
    pub fn validate(&self) -> Result<()> {
        let mut bad = vec![];
        if !(self.tau_step > 0.0) {
            bad.push("tau_step");
        }
        if !(self.t_step > 0.0) {
            bad.push("t_step");
        }
        if self.budget == 0 {
            bad.push("budget");
        }
        if self.seed_radius.is_some_and(|r| !(r >= 0.0)) {
            bad.push("seed_radius");
        }
        if self.pad.is_some_and(|p| !(p >= 0.0)) {
            bad.push("pad");
        }
        if self.thin.is_some_and(|p| !(p >= 0.0)) {
            bad.push("thin");
        }
        if self.seed_time.is_some_and(|t| !t.is_finite()) {
            bad.push("seed_time");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            invalid(format!("bad shadow options: {}", bad.join(", ")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub seeds_evaluated: usize,
    pub nm_evaluations: usize,
    pub polish_evaluations: usize,
    pub budget: usize,
    pub pseudo_samples: usize,
    pub orbit_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowingReport {
    pub mode: Mode,
    pub eps: f64,
    /// Whether the best seed achieves a distance below ε. A negative answer is
    /// relative to the search budget.
    pub found: bool,
    pub seed: Option<ManifoldPoint>,
    pub seed_time: f64,
    /// Orbit time h(s) relative to the seed; absent in orbital mode.
    pub reparametrization: Option<Reparametrization>,
    /// Sup of matched distances (Hausdorff distance in orbital mode).
    pub distance: f64,
    pub stats: SearchStats,
}

struct Problem<'a> {
    field: &'a VectorFieldDef,
    cfg: &'a IntegratorConfig,
    mode: Mode,
    steps: Steps,
    seed_time: f64,
    pseudo_times: Vec<f64>,
    pseudo_emb: Vec<Vec<f64>>,
    orbit_times: Vec<f64>,
    thin: f64,
}

impl Problem<'_> {
    fn orbit(&self, seed: &ManifoldPoint) -> Option<Vec<Vec<f64>>> {
        let pts = sample_times(self.field, seed, &self.orbit_times, self.cfg).ok()?;
        Some(pts.iter().map(|p| p.embed()).collect())
    }

    /// Orbit minus pseudotrajectory at equal times, embedded.
    fn residual(&self, seed: &ManifoldPoint) -> Option<Vec<f64>> {
        let times: Vec<f64> = self.pseudo_times.iter().map(|s| s - self.seed_time).collect();
        let pts = sample_times(self.field, seed, &times, self.cfg).ok()?;
        Some(pts.iter().zip(&self.pseudo_emb).flat_map(|(p, q)| p.embed().into_iter().zip(q).map(|(a, b)| a - b).collect::<Vec<f64>>()).collect())
    }

    fn value(&self, seed: &ManifoldPoint) -> f64 {
        let Some(orbit) = self.orbit(seed) else { return f64::INFINITY };
        match self.mode {
            Mode::Orbital => hausdorff_embedded(&thin(&orbit, self.thin), &thin(&self.pseudo_emb, self.thin)),
            _ => dp_match(&distance_matrix(&self.pseudo_emb, &orbit), self.steps).map_or(f64::INFINITY, |p| p.value),
        }
    }
}

/// Drops samples closer than `res` to the last kept one.
fn thin(pts: &[Vec<f64>], res: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        if out.last().is_none_or(|q| embedded_distance(p, q) >= res) {
            out.push(p.clone());
        }
    }
    out
}

fn grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}

fn seed_cube(center: &ManifoldPoint, radius: f64, per_dim: usize) -> Vec<ManifoldPoint> {
    let dim = center.dim();
    if per_dim <= 1 || radius == 0.0 {
        return vec![center.clone()];
    }
    let total = per_dim.pow(dim as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut c = center.coords.clone();
            for x in c.iter_mut() {
                let i = idx % per_dim;
                idx /= per_dim;
                *x += radius * (2.0 * i as f64 / (per_dim - 1) as f64 - 1.0);
            }
            point_from_chart(center.space, center.chart, c).ok()
        })
        .collect()
}

/// Dispatches on the mode.
pub fn match_with_mode(
    mode: Mode,
    field: &VectorFieldDef,
    g: &Pseudotrajectory,
    eps: f64,
    opts: &ShadowOptions,
    cfg: &IntegratorConfig,
) -> Result<ShadowingReport> {
    opts.validate()?;
    if !(eps > 0.0) {
        return invalid(format!("eps = {eps} must be positive"));
    }
    let (a, b) = g.window;
    let s0 = opts.seed_time.unwrap_or(0.0).clamp(a, b);
    let pad = opts.pad.unwrap_or_else(|| if mode == Mode::Orbital { 0.0 } else { (0.25 * (b - a)).max(2.0) });
    // closures are compared on one common grid
    let pseudo_step = if mode == Mode::Orbital { opts.tau_step.min(opts.t_step) } else { opts.tau_step };
    let pseudo_times = grid(a, b, pseudo_step);
    let pseudo_pts = g.sample(field, &pseudo_times, cfg)?;
    let steps = match mode {
        Mode::Standard => Steps::slope_band(eps, opts.tau_step, opts.t_step)?,
        _ => Steps::MONOTONE,
    };
    let problem = Problem {
        field,
        cfg,
        mode,
        steps,
        seed_time: s0,
        pseudo_emb: pseudo_pts.iter().map(|p| p.embed()).collect(),
        pseudo_times,
        orbit_times: grid(a - s0 - pad, b - s0 + pad, opts.t_step),
        thin: opts.thin.unwrap_or(eps / 100.0),
    };

    let center = g.evaluate(field, s0, cfg)?.canonical();
    let radius = opts.seed_radius.unwrap_or(5.0 * eps);
    let room = opts.budget.saturating_sub(opts.extra_seeds.len()).max(1);
    let dim = center.dim() as u32;
    let mut per_dim = opts.seed_grid;
    while per_dim > 1 && per_dim.pow(dim) > room {
        per_dim -= 1;
    }
    let mut seeds = seed_cube(&center, radius, per_dim);
    seeds.extend(opts.extra_seeds.iter().cloned());
    seeds.truncate(opts.budget);
    let values: Vec<f64> = seeds.par_iter().map(|s| problem.value(s)).collect();
    // min value, earliest index on ties
    let (best_idx, _) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut best = seeds[best_idx].canonical();
    let mut best_value = values[best_idx];

    let mut polish_evaluations = 0;
    if opts.polish_evals > 0 && best_value.is_finite() {
        let (space, chart) = (best.space, best.chart);
        let fd: Vec<f64> = best.coords.iter().map(|c| 1e-7 * c.abs().max(1.0)).collect();
        let res = levenberg_marquardt(
            |c| point_from_chart(space, chart, c.to_vec()).ok().and_then(|p| problem.residual(&p)),
            &best.coords,
            &fd,
            opts.polish_evals,
        );
        if let Some(res) = res {
            polish_evaluations = res.evaluations;
            if let Ok(p) = point_from_chart(space, chart, res.x) {
                let v = problem.value(&p);
                if v < best_value {
                    best = p.canonical();
                    best_value = v;
                }
            }
        }
    }

    let mut nm_evaluations = 0;
    if opts.nm_evals > 0 && best_value.is_finite() {
        let chart = best.chart;
        let space = best.space;
        let mut scale = if per_dim > 1 { 2.0 * radius / (per_dim - 1) as f64 } else { radius.max(eps) };
        // the min-max objective has plateaus; restart with a smaller simplex
        // whenever a run stalls
        while nm_evaluations < opts.nm_evals && scale > 1e-13 {
            let res = nelder_mead(
                |c| point_from_chart(space, chart, c.to_vec()).map_or(f64::INFINITY, |p| problem.value(&p)),
                &best.coords,
                &vec![scale; best.coords.len()],
                opts.nm_evals - nm_evaluations,
                1e-14,
            );
            nm_evaluations += res.evaluations;
            if res.value < best_value {
                best = point_from_chart(space, chart, res.x)?;
                best_value = res.value;
            } else {
                scale *= 0.1;
            }
        }
    }

    let mut stats = SearchStats {
        seeds_evaluated: seeds.len(),
        nm_evaluations,
        polish_evaluations,
        budget: opts.budget,
        pseudo_samples: problem.pseudo_times.len(),
        orbit_samples: problem.orbit_times.len(),
    };
    let mut report = ShadowingReport { mode, eps, found: false, seed: None, seed_time: s0, reparametrization: None, distance: f64::INFINITY, stats: stats.clone() };
    if !best_value.is_finite() {
        return Ok(report);
    }
    report.seed = Some(best.clone());
    if mode == Mode::Orbital {
        report.distance = best_value;
        report.found = best_value < eps;
        return Ok(report);
    }

    // witness h, made strictly increasing, then re-evaluated at its own times
    let orbit = problem.orbit(&best).expect("best seed integrates");
    let path = dp_match(&distance_matrix(&problem.pseudo_emb, &orbit), steps).expect("best seed has a matching");
    let mut bps: Vec<(f64, f64)> = Vec::with_capacity(path.cols.len());
    for (s, &j) in problem.pseudo_times.iter().zip(&path.cols) {
        let mut h = problem.orbit_times[j];
        if let Some(&(_, prev)) = bps.last() {
            if h <= prev {
                h = prev + 1e-9 * opts.t_step;
            }
        }
        bps.push((*s - s0, h));
    }
    let orbit_at_h = sample_times(field, &best, &bps.iter().map(|p| p.1).collect::<Vec<f64>>(), cfg)?;
    let mut dist: f64 = 0.0;
    for (p, o) in pseudo_pts.iter().zip(&orbit_at_h) {
        dist = dist.max(distance(p, o)?);
    }
    let h = Reparametrization::new(bps.iter().map(|&(s, h)| (s + s0, h)).collect())?;
    stats.nm_evaluations = nm_evaluations;
    report.stats = stats;
    report.reparametrization = Some(h);
    report.distance = dist;
    report.found = dist < eps;
    Ok(report)
}

/// Oriented shadowing: some orbit and increasing h with dist(g(s), φ(h(s), p)) < ε.
pub fn match_oriented(field: &VectorFieldDef, g: &Pseudotrajectory, eps: f64, opts: &ShadowOptions, cfg: &IntegratorConfig) -> Result<ShadowingReport> {
    match_with_mode(Mode::Oriented, field, g, eps, opts, cfg)
}

/// Standard shadowing: as oriented, with h ∈ Rep(ε).
pub fn match_standard(field: &VectorFieldDef, g: &Pseudotrajectory, eps: f64, opts: &ShadowOptions, cfg: &IntegratorConfig) -> Result<ShadowingReport> {
    match_with_mode(Mode::Standard, field, g, eps, opts, cfg)
}

/// Orbital shadowing: Hausdorff distance between sampled orbit and pseudo closures.
pub fn match_orbital(field: &VectorFieldDef, g: &Pseudotrajectory, eps: f64, opts: &ShadowOptions, cfg: &IntegratorConfig) -> Result<ShadowingReport> {
    match_with_mode(Mode::Orbital, field, g, eps, opts, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::linear_field_rows;
    use crate::shadow::rep_class_check;

    #[test]
    fn exact_orbit_is_matched_by_identity() {
        let f = linear_field_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let x = ManifoldPoint::euclidean(vec![1.0, 0.0]).unwrap();
        let g = Pseudotrajectory::from_orbit(&f, x.clone(), (0.0, 5.0)).unwrap();
        let cfg = IntegratorConfig::default();
        let opts = ShadowOptions { seed_grid: 0, nm_evals: 0, ..Default::default() };
        for mode in [Mode::Standard, Mode::Oriented, Mode::Orbital] {
            let r = match_with_mode(mode, &f, &g, 0.01, &opts, &cfg).unwrap();
            assert!(r.found, "{mode:?}");
            assert!(r.distance < 1e-7);
            assert_eq!(r.seed.as_ref().unwrap(), &x);
            if let Some(h) = &r.reparametrization {
                for &(s, t) in h.breakpoints() {
                    assert!((s - t).abs() < 1e-12);
                }
                assert!(rep_class_check(h, 0.01).unwrap());
            }
        }
    }

    #[test]
    fn seed_cube_counts() {
        let c = ManifoldPoint::euclidean(vec![0.0, 0.0]).unwrap();
        assert_eq!(seed_cube(&c, 1.0, 5).len(), 25);
        assert_eq!(seed_cube(&c, 1.0, 1).len(), 1);
        let s = seed_cube(&c, 1.0, 3);
        assert!(s.iter().any(|p| p.coords == vec![-1.0, 1.0]));
    }

    #[test]
    fn options_report_every_bad_field() {
        let o = ShadowOptions { tau_step: 0.0, budget: 0, pad: Some(-1.0), ..Default::default() };
        let e = o.validate().unwrap_err().to_string();
        assert!(e.contains("tau_step") && e.contains("budget") && e.contains("pad"));
    }
}
