// Negated comparisons like `!(dx > 0.0)` are deliberate: they reject NaN,
// which `dx <= 0.0` lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical library for conservative solutions of the Novikov equation:
//! multi-peakon dynamics, a characteristic-coordinate semi-linear solver that
//! continues through wave breaking, energy-concentration diagnostics at
//! peakon collisions, and a Finsler transport cost with geodesic-distance
//! upper bounds (plus the Camassa-Holm analog of the same machinery).

pub mod camassa_holm;
pub mod characteristic;
pub mod energy;
pub mod error;
pub mod grid;
pub mod peakon;
pub mod rng;
pub mod semilinear;
pub mod smooth;
pub mod tangent;

pub use error::{Error, Result};
