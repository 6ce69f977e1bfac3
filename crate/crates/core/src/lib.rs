//! Finite-scale verification engine for Besicovitch sets of Cantor graphs.
//!
//! The crate builds generalized Cantor sets and the enlarged rectangle
//! approximations of their Cantor graphs on an exact integer lattice, counts
//! intersecting pairs between a family and its rotated copy, and checks the
//! counting and area bounds that drive the `min(2 - s², 1/s)` dimension
//! estimate at finite scales.

pub mod bounds;
pub mod cantor;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod intersections;
pub mod runner;

pub use error::{Error, Result};
