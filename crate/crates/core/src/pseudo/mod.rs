//! Piecewise-flow pseudotrajectories: representation, evaluation, defect check,
//! and the explicit constructions used by the experiments.

mod constructions;

pub use constructions::{
    case_b1_pseudo, lemma1_orbit_pseudo, lemma1_rest_pseudo, local_estimate_check, ps_delta_pseudo, LocalEstimate,
    OrbitPseudo,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::VectorFieldDef;
use crate::fields::FieldDescriptor;
use crate::integrator::{sample_one_sided, sample_times, IntegratorConfig};
use crate::manifold::{distance, Chart, ManifoldPoint, Space};

/// g(t) = φ(t − anchor_t, anchor) for t in [tau, next tau). The first segment
/// also covers everything before its tau, the last everything after.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub tau: f64,
    pub anchor_t: f64,
    pub anchor: ManifoldPoint,
}

impl Segment {
    /// Frozen segment: g(tau + t) = φ(t, anchor).
    pub fn frozen(tau: f64, anchor: ManifoldPoint) -> Self {
        Segment { tau, anchor_t: tau, anchor }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pseudotrajectory {
    pub field: String,
    pub space: Space,
    /// Finite support used for verification and matching; g is an exact orbit
    /// on each side of it.
    pub window: (f64, f64),
    pub max_segment_len: f64,
    segments: Vec<Segment>,
}

impl Pseudotrajectory {
    pub fn new(field: &VectorFieldDef, segments: Vec<Segment>, window: (f64, f64), max_segment_len: f64) -> Result<Self> {
        if segments.is_empty() {
            return invalid("a pseudotrajectory needs at least one segment");
        }
        if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
            return invalid(format!("bad window {window:?}"));
        }
        if !(max_segment_len > 0.0) {
            return invalid("max_segment_len must be positive");
        }
        for s in &segments {
            if s.anchor.space != field.space {
                return Err(Error::SpaceMismatch(s.anchor.space.id(), field.space.id()));
            }
            if !(s.tau.is_finite() && s.anchor_t.is_finite()) {
                return invalid("segment times must be finite");
            }
        }
        for w in segments.windows(2) {
            let len = w[1].tau - w[0].tau;
            if !(len > 0.0) {
                return invalid(format!("segment start times must increase ({} then {})", w[0].tau, w[1].tau));
            }
            if len > max_segment_len * (1.0 + 1e-12) {
                return invalid(format!("segment at {} has length {len} > {max_segment_len}", w[0].tau));
            }
        }
        Ok(Pseudotrajectory { field: field.name.clone(), space: field.space, window, max_segment_len, segments })
    }

    /// A single exact orbit: g(t) = φ(t, x).
    pub fn from_orbit(field: &VectorFieldDef, x: ManifoldPoint, window: (f64, f64)) -> Result<Self> {
        Self::new(field, vec![Segment { tau: window.0, anchor_t: 0.0, anchor: x }], window, window.1 - window.0)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn segment_index(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.tau <= t).saturating_sub(1)
    }

    fn check_field(&self, field: &VectorFieldDef) -> Result<()> {
        if field.name != self.field || field.space != self.space {
            return invalid(format!("pseudotrajectory belongs to field {}, got {}", self.field, field.name));
        }
        Ok(())
    }

    pub fn evaluate(&self, field: &VectorFieldDef, t: f64, cfg: &IntegratorConfig) -> Result<ManifoldPoint> {
        Ok(self.sample(field, &[t], cfg)?.pop().unwrap())
    }

    /// g at nondecreasing times, one integration per segment.
    pub fn sample(&self, field: &VectorFieldDef, times: &[f64], cfg: &IntegratorConfig) -> Result<Vec<ManifoldPoint>> {
        self.check_field(field)?;
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
            return invalid("sample times must be finite and nondecreasing");
        }
        let mut out = Vec::with_capacity(times.len());
        let mut i = 0;
        while i < times.len() {
            let k = self.segment_index(times[i]);
            let end = self.segments.get(k + 1).map_or(f64::INFINITY, |s| s.tau);
            let j = i + times[i..].partition_point(|&t| t < end);
            let seg = &self.segments[k];
            let rel: Vec<f64> = times[i..j].iter().map(|t| t - seg.anchor_t).collect();
            out.extend(sample_times(field, &seg.anchor, &rel, cfg)?);
            i = j;
        }
        Ok(out)
    }

    /// (τ_k, |g(τ_k⁻) − g(τ_k)|) at every interior boundary.
    pub fn jumps(&self, field: &VectorFieldDef, cfg: &IntegratorConfig) -> Result<Vec<(f64, f64)>> {
        self.check_field(field)?;
        self.segments
            .windows(2)
            .map(|w| {
                let left = crate::integrator::integrate(field, &w[0].anchor, w[1].tau - w[0].anchor_t, cfg)?;
                let right = crate::integrator::integrate(field, &w[1].anchor, w[1].tau - w[1].anchor_t, cfg)?;
                Ok((w[1].tau, distance(&left, &right)?))
            })
            .collect()
    }

    pub fn to_file(&self, field: &FieldDescriptor) -> PseudoFile {
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, s)| SegmentRecord {
                tau: s.tau,
                anchor_t: (s.anchor_t != s.tau).then_some(s.anchor_t),
                chart: s.anchor.chart.name(),
                coords: s.anchor.coords.clone(),
                segment_len: self.segments.get(k + 1).map(|n| n.tau - s.tau),
            })
            .collect();
        PseudoFile { field: field.clone(), window: [self.window.0, self.window.1], max_segment_len: self.max_segment_len, segments }
    }
}

/// On-disk form of a pseudotrajectory together with the field it lives on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoFile {
    pub field: FieldDescriptor,
    pub window: [f64; 2],
    pub max_segment_len: f64,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub tau: f64,
    /// Time at which g passes through the anchor; defaults to tau.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_t: Option<f64>,
    pub chart: String,
    pub coords: Vec<f64>,
    /// Absent for the last (unbounded) segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_len: Option<f64>,
}

impl PseudoFile {
    pub fn load(&self) -> Result<(VectorFieldDef, Pseudotrajectory)> {
        let field = self.field.build()?;
        let mut segs = Vec::with_capacity(self.segments.len());
        for (k, r) in self.segments.iter().enumerate() {
            let anchor = ManifoldPoint::new(field.space, Chart::parse(&r.chart)?, r.coords.clone())?;
            if let (Some(len), Some(next)) = (r.segment_len, self.segments.get(k + 1)) {
                if ((r.tau + len) - next.tau).abs() > 1e-9 * (1.0 + next.tau.abs()) {
                    return invalid(format!("segment {k}: tau + segment_len does not reach the next tau"));
                }
            }
            segs.push(Segment { tau: r.tau, anchor_t: r.anchor_t.unwrap_or(r.tau), anchor });
        }
        let g = Pseudotrajectory::new(&field, segs, (self.window[0], self.window[1]), self.max_segment_len)?;
        Ok((field, g))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub sup_defect: f64,
    pub witness_tau: f64,
    pub witness_t: f64,
    pub tau_step: f64,
    pub t_step: f64,
    pub window: (f64, f64),
}

fn grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}

/// dist(g(τ + t), φ(t, g(τ))) at a single node.
pub fn defect_at(field: &VectorFieldDef, g: &Pseudotrajectory, tau: f64, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let pts = g.sample(field, &[tau, tau + t], cfg)?;
    distance(&pts[1], &crate::integrator::integrate(field, &pts[0], t, cfg)?)
}

/// Sup of dist(g(τ + t), φ(t, g(τ))) over τ in the window grid and t ∈ [0, 1].
/// The witness is the largest node, earliest τ (then t) on ties.
pub fn verify_pseudo(field: &VectorFieldDef, g: &Pseudotrajectory, tau_step: f64, t_step: f64, cfg: &IntegratorConfig) -> Result<DefectReport> {
    if !(tau_step > 0.0 && t_step > 0.0 && t_step <= 1.0) {
        return invalid(format!("grid steps must be positive (tau {tau_step}, t {t_step})"));
    }
    let taus = grid(g.window.0, g.window.1, tau_step);
    let ts = grid(0.0, 1.0, t_step);
    let mut all: Vec<f64> = taus.iter().flat_map(|a| ts.iter().map(move |t| a + t)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let values = g.sample(field, &all, cfg)?;
    let lookup = |x: f64| &values[all.partition_point(|&y| y < x)];
    let rows: Vec<Result<(f64, f64)>> = taus
        .par_iter()
        .map(|&tau| {
            let start = lookup(tau);
            let flowed = sample_one_sided(field, start, &ts, cfg).map_err(|e| Error::AtNode { tau, source: Box::new(e) })?;
            let mut best = (0.0, 0.0);
            for (t, y) in ts.iter().zip(&flowed) {
                let d = distance(lookup(tau + t), y)?;
                if d > best.0 {
                    best = (d, *t);
                }
            }
            Ok(best)
        })
        .collect();
    let mut report = DefectReport { sup_defect: 0.0, witness_tau: taus[0], witness_t: 0.0, tau_step, t_step, window: g.window };
    for (tau, row) in taus.iter().zip(rows) {
        let (d, t) = row?;
        if d > report.sup_defect {
            report.sup_defect = d;
            report.witness_tau = *tau;
            report.witness_t = t;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{linear_field_rows, rest_line_field};
    use crate::integrator::integrate;

    fn e2(x: f64, y: f64) -> ManifoldPoint {
        ManifoldPoint::euclidean(vec![x, y]).unwrap()
    }

    fn saddle() -> VectorFieldDef {
        linear_field_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn single_segment_is_the_flow() {
        let f = saddle();
        let x = e2(1.0, 0.01);
        let g = Pseudotrajectory::from_orbit(&f, x.clone(), (-2.0, 3.0)).unwrap();
        let cfg = IntegratorConfig::default();
        for t in [-4.0, -1.0, 0.0, 0.5, 3.0, 5.0] {
            let a = g.evaluate(&f, t, &cfg).unwrap();
            let b = integrate(&f, &x, t, &cfg).unwrap();
            assert!(distance(&a, &b).unwrap() < 1e-12);
        }
        let r = verify_pseudo(&f, &g, 0.1, 0.05, &cfg).unwrap();
        assert!(r.sup_defect < 1e-7, "{r:?}");
    }

    #[test]
    fn boundary_values_differ_by_the_jump() {
        let f = rest_line_field();
        let segs = vec![Segment::frozen(0.0, e2(0.0, 0.0)), Segment::frozen(1.0, e2(0.25, 0.0))];
        let g = Pseudotrajectory::new(&f, segs, (-1.0, 2.0), 1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let left = g.evaluate(&f, 1.0 - 1e-12, &cfg).unwrap();
        let right = g.evaluate(&f, 1.0, &cfg).unwrap();
        assert!((distance(&left, &right).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(g.jumps(&f, &cfg).unwrap(), vec![(1.0, 0.25)]);
        let r = verify_pseudo(&f, &g, 0.1, 0.05, &cfg).unwrap();
        assert!((r.sup_defect - 0.25).abs() < 1e-12);
        assert!((defect_at(&f, &g, r.witness_tau, r.witness_t, &cfg).unwrap() - r.sup_defect).abs() < 1e-12);
        // earliest witness on ties: τ = 0.1 (t = 0.9) already sees the jump
        assert!(r.witness_tau < 0.15 && r.witness_tau + r.witness_t >= 1.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        let f = saddle();
        let a = e2(0.0, 0.0);
        assert!(Pseudotrajectory::new(&f, vec![], (0.0, 1.0), 1.0).is_err());
        assert!(Pseudotrajectory::new(&f, vec![Segment::frozen(1.0, a.clone()), Segment::frozen(0.5, a.clone())], (0.0, 1.0), 1.0).is_err());
        assert!(Pseudotrajectory::new(&f, vec![Segment::frozen(0.0, a.clone()), Segment::frozen(2.0, a.clone()), Segment::frozen(2.5, a.clone())], (0.0, 3.0), 1.0).is_err());
        assert!(Pseudotrajectory::new(&f, vec![Segment::frozen(0.0, a.clone())], (1.0, 1.0), 1.0).is_err());
        let g = Pseudotrajectory::new(&f, vec![Segment::frozen(0.0, a)], (0.0, 1.0), 1.0).unwrap();
        assert!(g.evaluate(&rest_line_field(), 0.0, &IntegratorConfig::default()).is_err());
        assert!(verify_pseudo(&f, &g, 0.0, 0.1, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn refining_the_grid_does_not_lower_a_seen_defect() {
        let f = saddle();
        let segs = vec![Segment::frozen(0.0, e2(1.0, 0.01)), Segment::frozen(1.3, e2(0.3, 0.05))];
        let g = Pseudotrajectory::new(&f, segs, (0.0, 3.0), 2.0).unwrap();
        let cfg = IntegratorConfig::default();
        let coarse = verify_pseudo(&f, &g, 0.2, 0.1, &cfg).unwrap();
        let fine = verify_pseudo(&f, &g, 0.1, 0.05, &cfg).unwrap();
        assert!(fine.sup_defect >= coarse.sup_defect - 1e-8);
    }

    #[test]
    fn file_round_trip() {
        let d = FieldDescriptor::Linear { matrix: vec![vec![-1.0, 0.0], vec![0.0, 1.0]] };
        let f = d.build().unwrap();
        let segs = vec![Segment { tau: -1.0, anchor_t: 0.0, anchor: e2(1.0, 0.0) }, Segment::frozen(0.5, e2(0.5, 0.1))];
        let g = Pseudotrajectory::new(&f, segs, (-1.0, 2.0), 5.0).unwrap();
        let file = g.to_file(&d);
        let json = serde_json::to_string(&file).unwrap();
        let back: PseudoFile = serde_json::from_str(&json).unwrap();
        let (f2, g2) = back.load().unwrap();
        assert_eq!(f2.name, f.name);
        assert_eq!(g2, g);
        assert_eq!(file.segments[0].segment_len, Some(1.5));
        assert_eq!(file.segments[1].segment_len, None);
    }
}
