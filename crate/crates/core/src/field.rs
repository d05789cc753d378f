//! Vector fields evaluated in the chart of the point.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{Chart, ManifoldPoint, Space};

pub type Evaluator = dyn Fn(Chart, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

#[derive(Clone)]
pub struct VectorFieldDef {
    pub name: String,
    pub space: Space,
    pub smoothness_note: String,
    pub(crate) eval: Arc<Evaluator>,
}

impl fmt::Debug for VectorFieldDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldDef")
            .field("name", &self.name)
            .field("space", &self.space)
            .finish()
    }
}

impl VectorFieldDef {
    pub fn new<F>(name: impl Into<String>, space: Space, smoothness_note: impl Into<String>, eval: F) -> Self
    where
        F: Fn(Chart, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        VectorFieldDef { name: name.into(), space, smoothness_note: smoothness_note.into(), eval: Arc::new(eval) }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Raw evaluation in chart coordinates; `out` receives the coordinate velocity.
    pub fn eval_coords(&self, chart: Chart, coords: &[f64], out: &mut [f64]) -> Result<()> {
        if !chart.belongs_to(self.space) {
            return Err(Error::UnknownChart { chart: chart.name(), space: self.space.id() });
        }
        (self.eval)(chart, coords, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(out.to_vec()));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &ManifoldPoint) -> Result<Vec<f64>> {
        if x.space != self.space {
            return Err(Error::SpaceMismatch(x.space.id(), self.space.id()));
        }
        let mut out = vec![0.0; self.dim()];
        self.eval_coords(x.chart, &x.coords, &mut out)?;
        Ok(out)
    }
}

/// X(x) in the chart of x.
pub fn evaluate_field(field: &VectorFieldDef, x: &ManifoldPoint) -> Result<Vec<f64>> {
    field.evaluate(x)
}

/// Euclidean norm of the coordinate velocity.
pub fn speed(field: &VectorFieldDef, x: &ManifoldPoint) -> Result<f64> {
    Ok(field.evaluate(x)?.iter().map(|v| v * v).sum::<f64>().sqrt())
}
