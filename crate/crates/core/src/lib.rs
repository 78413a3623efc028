//! Benchmark toolkit for dimensionality reduction.
//!
//! Synthetic datasets are produced by bending each axis of a grid along a
//! plane curve of prescribed curvature and immersing the result in a
//! higher-dimensional space ([`manifold`]). A reducer's output is scored by
//! the L2 norm of the sectional curvature of the round-trip map's pullback
//! metric ([`geometry`], [`estimation`]); the neighborhood preservation
//! ratio is available as a baseline ([`reducers::npr()`]). The [`bench`]
//! module runs the whole pipeline over the instance suite.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod curve;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod knn;
pub mod manifold;
pub mod reducers;
pub mod spline;

pub use error::{Error, ProtocolError, Result};
