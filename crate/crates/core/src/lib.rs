// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod fields;
pub mod field;
pub mod integrator;
pub mod jacobian;
pub mod manifold;
pub mod optim;
pub mod poincare;
pub mod pseudo;
pub mod shadow;
pub mod trajectory;

pub use error::{Error, Result};
