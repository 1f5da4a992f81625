//! Modified carrying simplex analysis for discrete competitive Kolmogorov maps
//! `T_i(x) = x_i f_i(x)`.
//!
//! * [`model`]: model families, `T`, `Df`, `DT`, `M`, `M̃` and axial fixed points.
//! * [`verify`]: sufficient conditions for a modified carrying simplex.
//! * [`simplex`]: numerical approximation of the simplex as a radial graph.
//! * [`dynamics`]: orbits, fixed points and ω-limit classification.
//! * [`dominance`]: nullcline-plane relations, vanishing/dominance and cascades.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dominance;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod simplex;
pub mod verify;

pub use error::{CsxError, Result};
pub use model::{Family, GrowthField, MatrixKind, ModelSpec, Response};
