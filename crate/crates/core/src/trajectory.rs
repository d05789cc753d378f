//! Sampled orbits and their CSV/JSON export.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::VectorFieldDef;
use crate::integrator::{sample_times, IntegratorConfig};
use crate::manifold::{Chart, ManifoldPoint, Space};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: ManifoldPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub field: String,
    pub space: Space,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(field: impl Into<String>, space: Space, samples: Vec<Sample>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidArgument("sample times must strictly increase".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.x.space != space) {
            return Err(Error::SpaceMismatch(s.x.space.id(), space.id()));
        }
        Ok(Trajectory { field: field.into(), space, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &ManifoldPoint> {
        self.samples.iter().map(|s| &s.x)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.space.dim();
        let mut header = String::from("t,chart");
        for i in 1..=n {
            header.push_str(&format!(",c{i}"));
        }
        writeln!(w, "{header}")?;
        for s in &self.samples {
            let mut line = format!("{},{}", s.t, s.x.chart.name());
            for c in &s.x.coords {
                line.push_str(&format!(",{c}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, field: impl Into<String>, space: Space) -> Result<Self> {
        let mut samples = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 + space.dim() {
                return Err(Error::InvalidArgument(format!("line {}: expected {} fields", k + 1, 2 + space.dim())));
            }
            let bad = |e: std::num::ParseFloatError| Error::InvalidArgument(format!("line {}: {e}", k + 1));
            let t: f64 = parts[0].trim().parse().map_err(bad)?;
            let chart = Chart::parse(parts[1].trim())?;
            let coords = parts[2..].iter().map(|p| p.trim().parse::<f64>().map_err(bad)).collect::<Result<Vec<_>>>()?;
            samples.push(Sample { t, x: ManifoldPoint::new(space, chart, coords)? });
        }
        Trajectory::new(field, space, samples)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Orbit of x (taken as the value at time 0) sampled on [t0, t1] with spacing ≤ max_dt.
pub fn trajectory(field: &VectorFieldDef, x: &ManifoldPoint, t0: f64, t1: f64, max_dt: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !(t0 < t1) || !(max_dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need t0 < t1 and max_dt > 0, got [{t0}, {t1}], {max_dt}")));
    }
    let n = ((t1 - t0) / max_dt).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
    let pts = sample_times(field, x, &times, cfg)?;
    let samples = times.into_iter().zip(pts).map(|(t, x)| Sample { t, x }).collect();
    Trajectory::new(field.name.clone(), field.space, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::distance;

    fn saddle() -> VectorFieldDef {
        VectorFieldDef::new("saddle", Space::Euclidean(2), "", |_, x, out| {
            out[0] = -x[0];
            out[1] = x[1];
            Ok(())
        })
    }

    #[test]
    fn saddle_closed_form() {
        let x = ManifoldPoint::euclidean(vec![1.0, 1e-6]).unwrap();
        let tr = trajectory(&saddle(), &x, 0.0, 10.0, 0.1, &IntegratorConfig::default()).unwrap();
        let last = tr.samples.last().unwrap();
        assert_eq!(last.t, 10.0);
        // tolerance times path length
        assert!((last.x.coords[0] - (-10.0f64).exp()).abs() < 1e-8);
        assert!((last.x.coords[1] - 1e-6 * 10.0f64.exp()).abs() < 1e-8);
        assert!(tr.samples.windows(2).all(|w| w[1].t - w[0].t <= 0.1 + 1e-12));
    }

    #[test]
    fn rest_point_is_constant() {
        let x = ManifoldPoint::euclidean(vec![0.0, 0.0]).unwrap();
        let tr = trajectory(&saddle(), &x, -3.0, 3.0, 0.5, &IntegratorConfig::default()).unwrap();
        assert!(tr.points().all(|p| p == &x));
    }

    #[test]
    fn csv_round_trip() {
        let x = ManifoldPoint::euclidean(vec![0.5, 0.25]).unwrap();
        let tr = trajectory(&saddle(), &x, 0.0, 1.0, 0.25, &IntegratorConfig::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,chart,c1,c2\n0,flat,0.5,0.25"));
        let back = Trajectory::read_csv(std::io::Cursor::new(buf), "saddle", Space::Euclidean(2)).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn group_law_between_samples() {
        let cfg = IntegratorConfig::default();
        let x = ManifoldPoint::euclidean(vec![1.0, 0.01]).unwrap();
        let tr = trajectory(&saddle(), &x, 0.0, 4.0, 0.2, &cfg).unwrap();
        let (a, b) = (&tr.samples[3], &tr.samples[15]);
        let y = crate::integrator::integrate(&saddle(), &a.x, b.t - a.t, &cfg).unwrap();
        assert!(distance(&y, &b.x).unwrap() < 1e-9 * (b.t - a.t) * 10.0);
    }
}
