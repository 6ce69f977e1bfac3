//! Generalized Cantor sets, Cantor graphs and their rectangle approximations.

mod approx;
mod digits;

pub use approx::{
    graph_points, scale_index, Decomposition, GridRect, LatticeBox, LatticeInterval, LatticePoint,
    Level, DEFAULT_ENUMERATION_CAP,
};
pub(crate) use digits::splitmix64;
pub use digits::{Branch, DigitSystem, Mode, Word};
