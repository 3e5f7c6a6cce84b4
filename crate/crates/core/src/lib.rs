#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod polybasis;
pub mod vem_elasticity;
pub mod vem_diffusion;
pub mod element;
pub mod solver;
pub mod estimator;
pub mod adaptivity;
pub mod harness;

pub use error::{Result, VemError};
