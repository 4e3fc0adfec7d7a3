//! Numerical toolkit for Carleson measures of the Dirichlet space.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: arcs, the two shifted dyadic grids, Carleson boxes and the
//!   covering lemmas used to compare continuous and dyadic kernels.
//! - [`measures`]: weights, aligned disk quadrature, box masses and the
//!   doubling / reverse-doubling testers.
//! - [`operators`]: reproducing kernels, discretized integral operators,
//!   weighted operator norms, `K_1` and the Bergman projection.
//! - [`dyadic`]: dyadic model operators, the tree mapping and its embedding
//!   norms, and the two-weight testing constant.
//! - [`dirichlet`]: Dirichlet norms, Carleson-constant estimation and the
//!   end-to-end certification pipeline.
//! - [`cli`]: configuration, report schema and command dispatch for the
//!   `carleson-lab` binary.

pub mod cli;
pub mod dirichlet;
pub mod dyadic;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod operators;
pub mod report;

pub use error::{Error, Result};
pub use num_complex::Complex64;
