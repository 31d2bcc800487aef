//! Spacing statistics and `r`-level correlations of the squares modulo a
//! square-free integer `q`.
//!
//! The exact layer (residue sets, partition Möbius inversion, per-prime
//! counts, congruence lattices, the three correlation evaluators and the
//! main-term identity) works in arbitrary-precision rationals. Floating
//! point appears only in the statistical summaries of [`spacings`].

pub mod arith;
pub mod cli;
pub mod correlations;
pub mod counting;
pub mod error;
pub mod lattices;
pub mod partitions;
pub mod spacings;

pub use arith::{enumerate_squares, make_modulus, ResidueSet, SquareFreeModulus};
pub use correlations::{correlate, CorrelationOptions, CorrelationResult, Method};
pub use error::{Error, Result};
pub use lattices::ConvexRegion;
pub use partitions::{PartitionPoset, SetPartition};
pub use spacings::CirclePointSet;
