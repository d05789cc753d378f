//! Shadowing decisions: monotone time matching by min-max dynamic programming,
//! Hausdorff distance for orbital shadowing, multistart orbit search, and the
//! expansion-rate predicate for linear saddles.

mod search;

pub use search::{match_oriented, match_orbital, match_standard, match_with_mode, Mode, SearchStats, ShadowOptions, ShadowingReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manifold::{distance, embedded_distance, ManifoldPoint};

/// Strictly increasing piecewise-linear h through the breakpoints (s_i, h_i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reparametrization {
    breakpoints: Vec<(f64, f64)>,
}

impl Reparametrization {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return invalid("a reparametrization needs at least one breakpoint");
        }
        if breakpoints.iter().any(|(s, h)| !s.is_finite() || !h.is_finite()) {
            return invalid("non-finite breakpoint");
        }
        if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return invalid("breakpoints must be strictly increasing in both coordinates");
        }
        Ok(Reparametrization { breakpoints })
    }

    pub fn identity(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, a), (b, b)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// h(s), extended with the end slopes (slope 1 for a single breakpoint).
    pub fn eval(&self, s: f64) -> f64 {
        let b = &self.breakpoints;
        if b.len() == 1 {
            return b[0].1 + (s - b[0].0);
        }
        let k = b.partition_point(|p| p.0 <= s).clamp(1, b.len() - 1);
        let (s0, h0) = b[k - 1];
        let (s1, h1) = b[k];
        h0 + (h1 - h0) * (s - s0) / (s1 - s0)
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }
}

/// h ∈ Rep(a): every chord slope lies in (1 − a, 1 + a). For piecewise-linear
/// h the chord slopes are averages of segment slopes, so checking segments suffices.
pub fn rep_class_check(h: &Reparametrization, a: f64) -> Result<bool> {
    if !(a > 0.0) {
        return invalid(format!("a = {a} must be positive"));
    }
    Ok(h.slopes().iter().all(|&k| k > 1.0 - a && k < 1.0 + a))
}

/// Admissible column advances j' − j between consecutive pseudo samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Steps {
    pub lo: usize,
    /// None: unbounded.
    pub hi: Option<usize>,
}

impl Steps {
    pub const MONOTONE: Steps = Steps { lo: 0, hi: None };

    /// Column advances k ≥ 1 whose slope k·t_step/tau_step lies in (1 − eps, 1 + eps).
    pub fn slope_band(eps: f64, tau_step: f64, t_step: f64) -> Result<Steps> {
        let r = t_step / tau_step;
        let ks: Vec<usize> = (1..=((1.0 + eps) / r).ceil() as usize + 1).filter(|&k| (k as f64 * r) > 1.0 - eps && (k as f64 * r) < 1.0 + eps).collect();
        match (ks.first(), ks.last()) {
            (Some(&lo), Some(&hi)) => Ok(Steps { lo, hi: Some(hi) }),
            _ => invalid(format!("no admissible slope in (1 − {eps}, 1 + {eps}) for steps {tau_step}/{t_step}")),
        }
    }

    fn allows(&self, k: usize) -> bool {
        k >= self.lo && self.hi.is_none_or(|h| k <= h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPath {
    /// min over admissible matchings of the max matched distance.
    pub value: f64,
    /// Orbit sample index matched to each pseudo sample.
    pub cols: Vec<usize>,
}

/// Min-max matching of rows (pseudo samples) to columns (orbit samples), rows
/// all used in order, columns advancing by admissible steps, free start and
/// end column. Returns the lexicographically earliest optimal matching.
pub fn dp_match(d: &[Vec<f64>], steps: Steps) -> Option<MatchPath> {
    let n = d.len();
    let m = d.first()?.len();
    if m == 0 || d.iter().any(|r| r.len() != m) {
        return None;
    }
    // b[i][j]: best value of rows i.. given row i sits at column j
    let mut b = vec![vec![f64::INFINITY; m]; n];
    b[n - 1].clone_from(&d[n - 1]);
    for i in (0..n - 1).rev() {
        let next = &b[i + 1];
        let best_next: Vec<f64> = match steps.hi {
            None => {
                let mut suffix = vec![f64::INFINITY; m + 1];
                for j in (0..m).rev() {
                    suffix[j] = suffix[j + 1].min(next[j]);
                }
                (0..m).map(|j| if j + steps.lo < m { suffix[j + steps.lo] } else { f64::INFINITY }).collect()
            }
            Some(hi) => (0..m).map(|j| (j + steps.lo..=(j + hi).min(m - 1)).map(|k| next[k]).fold(f64::INFINITY, f64::min)).collect(),
        };
        for j in 0..m {
            b[i][j] = d[i][j].max(best_next[j]);
        }
    }
    let value = b[0].iter().copied().fold(f64::INFINITY, f64::min);
    if !value.is_finite() {
        return None;
    }
    let mut cols = Vec::with_capacity(n);
    let mut j = b[0].iter().position(|&v| v <= value)?;
    cols.push(j);
    for row in b.iter().skip(1) {
        j = (j..m).find(|&k| steps.allows(k - j) && row[k] <= value)?;
        cols.push(j);
    }
    Some(MatchPath { value, cols })
}

/// Matrix of pairwise distances between embedded samples.
pub fn distance_matrix(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|a| cols.iter().map(|b| embedded_distance(a, b)).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceMatch {
    pub found: bool,
    pub value: f64,
    pub cols: Vec<usize>,
}

/// Exhaustive oracle for dp_match on at most 8 samples per side; the first
/// optimal matching in lexicographic order is returned.
pub fn brute_force_match(orbit: &[ManifoldPoint], pseudo: &[ManifoldPoint], eps: f64, steps: Steps) -> Result<Option<BruteForceMatch>> {
    if orbit.len() > 8 || pseudo.len() > 8 {
        return Err(Error::SizeCap(format!("brute force is limited to 8 samples per side (got {} and {})", pseudo.len(), orbit.len())));
    }
    if orbit.is_empty() || pseudo.is_empty() {
        return invalid("empty sample sequence");
    }
    let d: Vec<Vec<f64>> = pseudo.iter().map(|p| orbit.iter().map(|o| distance(p, o)).collect::<Result<Vec<f64>>>()).collect::<Result<_>>()?;
    let (n, m) = (pseudo.len(), orbit.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cols = vec![0usize; n];
    fn rec(i: usize, d: &[Vec<f64>], m: usize, steps: Steps, cols: &mut Vec<usize>, cur: f64, best: &mut Option<(f64, Vec<usize>)>) {
        if i == d.len() {
            if best.as_ref().is_none_or(|(v, _)| cur < *v) {
                *best = Some((cur, cols.clone()));
            }
            return;
        }
        let start = if i == 0 { 0 } else { cols[i - 1] };
        for j in start..m {
            if i > 0 && !steps.allows(j - cols[i - 1]) {
                continue;
            }
            cols[i] = j;
            rec(i + 1, d, m, steps, cols, cur.max(d[i][j]), best);
        }
    }
    rec(0, &d, m, steps, &mut cols, 0.0, &mut best);
    Ok(best.map(|(value, cols)| BruteForceMatch { found: value < eps, value, cols }))
}

/// Symmetric Hausdorff distance between two finite samples.
pub fn hausdorff_distance(a: &[ManifoldPoint], b: &[ManifoldPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("Hausdorff distance of an empty set");
    }
    if let Some(p) = a.iter().chain(b).find(|p| p.space != a[0].space) {
        return Err(Error::SpaceMismatch(p.space.id(), a[0].space.id()));
    }
    let ea: Vec<Vec<f64>> = a.iter().map(|p| p.embed()).collect();
    let eb: Vec<Vec<f64>> = b.iter().map(|p| p.embed()).collect();
    Ok(hausdorff_embedded(&ea, &eb))
}

pub(crate) fn hausdorff_embedded(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter().map(|p| y.iter().map(|q| embedded_distance(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Whether b ∈ (0, a) satisfies
/// log K − log C + (μ/λ − 1)(log(a/2) − log b) ≥ 0.
pub fn weakest_expansion_bound(k: f64, c: f64, mu: f64, lambda: f64, a: f64, b: f64) -> Result<bool> {
    if !(k > 0.0 && c > 0.0 && a > 0.0 && b > 0.0) {
        return invalid("K, C, a, b must be positive");
    }
    if !(mu > lambda && lambda > 0.0) {
        return invalid("need μ > λ > 0");
    }
    if !(b < a) {
        return invalid("need b < a");
    }
    let lhs = k.ln() - c.ln() + (mu / lambda - 1.0) * ((a / 2.0).ln() - b.ln());
    Ok(lhs >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p1(x: f64) -> ManifoldPoint {
        ManifoldPoint::euclidean(vec![x]).unwrap()
    }

    #[test]
    fn rep_examples() {
        let id = Reparametrization::identity(0.0, 5.0).unwrap();
        for a in [1e-6, 0.1, 2.0] {
            assert!(rep_class_check(&id, a).unwrap());
        }
        let a = 0.2;
        let mut pts = vec![(0.0, 0.0)];
        for i in 1..10 {
            let slope = if i % 2 == 0 { 1.0 + a / 2.0 } else { 1.0 - a / 2.0 };
            let (s, h) = pts[i - 1];
            pts.push((s + 1.0, h + slope));
        }
        assert!(rep_class_check(&Reparametrization::new(pts).unwrap(), a).unwrap());
        let steep = Reparametrization::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0 + 2.0 * a)]).unwrap();
        assert!(!rep_class_check(&steep, a).unwrap());
        assert!(Reparametrization::new(vec![(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(rep_class_check(&id, 0.0).is_err());
        let h = Reparametrization::new(vec![(0.0, 1.0), (2.0, 5.0)]).unwrap();
        assert_eq!(h.eval(1.0), 3.0);
        assert_eq!(h.eval(3.0), 7.0);
    }

    #[test]
    fn dp_equals_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let a: Vec<ManifoldPoint> = (0..n).map(|_| p1(rng.gen_range(0.0..1.0))).collect();
            let b: Vec<ManifoldPoint> = (0..m).map(|_| p1(rng.gen_range(0.0..1.0))).collect();
            let steps = [Steps::MONOTONE, Steps { lo: 1, hi: Some(2) }, Steps { lo: 2, hi: Some(2) }][trial % 3];
            let eps = rng.gen_range(0.0..1.0);
            let brute = brute_force_match(&b, &a, eps, steps).unwrap();
            let d: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| distance(x, y).unwrap()).collect()).collect();
            let dp = dp_match(&d, steps);
            match (dp, brute) {
                (None, None) => {}
                (Some(p), Some(q)) => {
                    assert_eq!(p.value, q.value);
                    assert_eq!(p.value < eps, q.found);
                    assert_eq!(p.cols, q.cols);
                }
                (p, q) => panic!("trial {trial}: {p:?} vs {q:?}"),
            }
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let r = brute_force_match(&[p1(0.0)], &[p1(0.3)], 0.5, Steps::MONOTONE).unwrap().unwrap();
        assert!((r.value - 0.3).abs() < 1e-15 && r.found);
        let many: Vec<ManifoldPoint> = (0..9).map(|i| p1(i as f64)).collect();
        assert!(matches!(brute_force_match(&many, &many[..2], 0.1, Steps::MONOTONE), Err(Error::SizeCap(_))));
        // more slack never turns a match into a non-match
        let a = [p1(0.0), p1(1.0)];
        let b = [p1(0.1), p1(0.9)];
        for eps in [0.05, 0.1, 0.11, 0.2] {
            let x = brute_force_match(&b, &a, eps, Steps::MONOTONE).unwrap().unwrap().found;
            let y = brute_force_match(&b, &a, eps + 0.05, Steps::MONOTONE).unwrap().unwrap().found;
            assert!(!x || y);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a: Vec<ManifoldPoint> = (0..=100).map(|i| ManifoldPoint::euclidean(vec![i as f64 / 100.0, 0.0]).unwrap()).collect();
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b: Vec<ManifoldPoint> = a.iter().map(|p| ManifoldPoint::euclidean(vec![p.coords[0], 0.3]).unwrap()).collect();
        assert!((hausdorff_distance(&a, &b).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), hausdorff_distance(&b, &a).unwrap());
        assert!((hausdorff_distance(&[p1(1.0)], &[p1(3.5)]).unwrap() - 2.5).abs() < 1e-15);
        assert!(hausdorff_distance(&a, &[p1(0.0)]).is_err());
        assert!(hausdorff_distance(&[], &a).is_err());
    }

    #[test]
    fn expansion_predicate_table() {
        let (c, l, a) = (3.0, 0.7, 0.4);
        assert!(weakest_expansion_bound(c, c, 2.0 * l, l, a, a / 2.0).unwrap());
        assert!(weakest_expansion_bound(c, c, 2.0 * l, l, a, a / 4.0).unwrap());
        assert!(!weakest_expansion_bound(c / 10.0, c, 1.01 * l, l, a, 0.49 * a).unwrap());
        assert!(weakest_expansion_bound(1.0, 1.0, 1.0, 1.0, 1.0, 0.5).is_err());
        assert!(weakest_expansion_bound(1.0, 1.0, 2.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn slope_band_steps() {
        assert_eq!(Steps::slope_band(0.1, 0.1, 0.05).unwrap(), Steps { lo: 2, hi: Some(2) });
        assert_eq!(Steps::slope_band(0.6, 0.1, 0.05).unwrap(), Steps { lo: 1, hi: Some(3) });
        assert!(Steps::slope_band(0.1, 0.1, 0.3).is_err());
    }
}
