//! Serializable description of a field, enough to rebuild it exactly.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::VectorFieldDef;

use super::sphere_fields::build_x2_rotated;
use super::{build_x1, build_x2, build_xstar, closed_orbit_field, linear_field_rows, rest_line_field, XStarParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDescriptor {
    Linear { matrix: Vec<Vec<f64>> },
    RestLine,
    ClosedOrbit { omega: f64 },
    X1,
    X2,
    X2Rotated { angle: f64 },
    Xstar {
        #[serde(default)]
        params: XStarParams,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendRadius {
    pub name: String,
    pub inner: f64,
    pub outer: f64,
}

impl FieldDescriptor {
    pub fn build(&self) -> Result<VectorFieldDef> {
        Ok(match self {
            FieldDescriptor::Linear { matrix } => linear_field_rows(matrix)?,
            FieldDescriptor::RestLine => rest_line_field(),
            FieldDescriptor::ClosedOrbit { omega } => closed_orbit_field(*omega),
            FieldDescriptor::X1 => build_x1(),
            FieldDescriptor::X2 => build_x2(),
            FieldDescriptor::X2Rotated { angle } => build_x2_rotated(*angle),
            FieldDescriptor::Xstar { params } => build_xstar(params.clone())?.field,
        })
    }

    pub fn blend_radii(&self) -> Vec<BlendRadius> {
        let br = |name: &str, (inner, outer): (f64, f64)| BlendRadius { name: name.into(), inner, outer };
        let x1 = br("x1_pole_radius", (0.2, 0.4));
        let x2 = br("x2_rest_offset", (super::X2_LINEAR_RADIUS, 0.4));
        match self {
            FieldDescriptor::X1 => vec![x1],
            FieldDescriptor::X2 | FieldDescriptor::X2Rotated { .. } => vec![x2],
            FieldDescriptor::Xstar { params } => vec![
                x1,
                x2,
                br("g1_r1", params.g1_blend),
                br("g4_r1", params.g4_cutoff),
                br("m2_weight_r1", params.weight_blend),
            ],
            _ => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        for d in [
            FieldDescriptor::Linear { matrix: vec![vec![0.0, 1.0], vec![-1.0, 0.0]] },
            FieldDescriptor::RestLine,
            FieldDescriptor::ClosedOrbit { omega: 0.1 },
            FieldDescriptor::Xstar { params: XStarParams::default() },
        ] {
            let s = serde_json::to_string(&d).unwrap();
            let back: FieldDescriptor = serde_json::from_str(&s).unwrap();
            assert_eq!(back, d);
            assert!(back.build().is_ok());
        }
        let d: FieldDescriptor = serde_json::from_str(r#"{"kind":"xstar"}"#).unwrap();
        assert_eq!(d, FieldDescriptor::Xstar { params: XStarParams::default() });
    }

    #[test]
    fn bad_matrix_rejected() {
        assert!(FieldDescriptor::Linear { matrix: vec![vec![1.0, 2.0]] }.build().is_err());
    }
}
