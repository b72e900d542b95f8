//! Robust regional model predictive control: min-max MPC condensed into an
//! epigraph QP, affine feedback laws valid on polytopic regions, and a
//! closed-loop benchmark harness.

pub mod bench;
pub mod condense;
pub mod control;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod numerics;
pub mod qpsolve;
pub mod regional;
pub mod serde_mat;

pub use error::{Error, Result};
