//! Exact dyadic-grid toolkit: Haar shift operators, nonincreasing
//! rearrangements, median stopping-time decompositions, Muckenhoupt
//! constants and weighted operator norms.
//!
//! Everything is built on two types: [`grid::DyadicInterval`], a node of the
//! dyadic tree over the unit root interval, and [`grid::StepFunction`], a
//! function constant on the cells of a uniform dyadic grid.  All set and
//! measure arithmetic on these objects is exact (integer index arithmetic,
//! dyadic cell widths), so the inequalities checked by the test suites hold
//! with machine-level slack rather than discretization error.

pub mod error;
pub mod grid;
pub mod haar;
pub mod lerner;
pub mod petermichl;
pub mod rearrangement;
pub mod weighted;

pub use error::{Error, Result};
pub use grid::{DyadicInterval, GridConfig, StepFunction};
