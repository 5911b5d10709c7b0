//! Online square-into-square packing.
//!
//! Two online packers with provable density guarantees, plus the
//! machinery to check them:
//!
//! - [`fixed`]: the Recursive Shelf Algorithm for a fixed unit-square
//!   container, which packs any online sequence of squares with total
//!   area at most 11/32.
//! - [`brick`]: the dynamic-container brick algorithm, which maintains a
//!   packing density of at least 1/8 and a container edge within 2√2 of
//!   optimal.
//! - [`verifier`]: an independent oracle that re-checks geometry and the
//!   accounting behind every density claim, with exact arithmetic.
//! - [`adversary`]: a game harness playing the known lower-bound
//!   opponent against any dynamic packer, plus seeded stream generators.
//!
//! All coordinates live in Q(√2) ([`scalar::Scalar`]); comparisons are
//! exact, so every check is zero-tolerance.

pub mod adversary;
pub mod brick;
pub mod fixed;
pub mod geometry;
pub mod io;
pub mod scalar;
pub mod shelf;
pub mod svg;
pub mod verifier;

pub use geometry::{PlacedSquare, Region};
pub use scalar::Scalar;
