//! Lipschitz graphs through planar self-similar sets.
//!
//! Given an iterated function system of planar similarities, this crate
//! extracts a sub-system whose attractor keeps most of the dimension and
//! builds a piecewise-linear graph that covers it, tracking the Lipschitz
//! constant against closed-form bounds. The supporting machinery covers
//! convex projections, Favard length, Vitali-type interval extraction,
//! dimension lower bounds, the 4-corner Cantor set and Davies' projection
//! functional.
//!
//! Heavy scans (angle grids, randomized checks, generation enumeration) run
//! on rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. [`exec::sequential`] forces the sequential path at
//! runtime, which the benchmarks use for side-by-side timings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor4;
pub mod dimension;
pub mod error;
pub mod exec;
pub mod favard;
pub mod geometry;
pub mod graph;
pub mod ifs;
pub mod report;
pub mod rotational;
pub mod subifs;

pub use error::{Error, Result};
pub use geometry::{Angle, ConvexPolygon, Interval, IntervalUnion, Point, GEOM_TOL};
pub use ifs::{Generation, Ifs, SimilarityMap, Word};
