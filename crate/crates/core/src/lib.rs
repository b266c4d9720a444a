//! Numerical toolkit for Muckenhoupt-type weights on dyadic grids.
//!
//! Every function lives on the finest level of a dyadic grid over `[0,1)^n`
//! and is piecewise constant there, so averages, norms and characteristics
//! are exact finite sums. On top of that substrate the crate provides
//! symmetric matrix calculus, origin-symmetric convex bodies described by
//! support functions, weight characteristics (scalar, matrix and convex
//! set-valued), and the maximal, sparse, iteration and Hilbert operators.
//!
//! Inner loops over cubes, cells and directions run on rayon when the
//! `parallel` feature is on (the default); see [`par`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod convex;
pub mod error;
pub mod gen;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod weights;

pub use convex::{ConvexBody, DirectionSet, NormFunction};
pub use error::{Error, Result};
pub use grid::{Cube, DyadicField, DyadicGrid, Vector, WeightRef};
pub use linalg::{Mat, SpdMatrix};
pub use weights::{CharacteristicReport, Variant};
