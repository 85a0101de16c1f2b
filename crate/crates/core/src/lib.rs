//! Learning shallow quantum circuits from measurement data.
//!
//! A hidden depth-`d` circuit on a lattice prepares `|ψ⟩`. Reduced density
//! matrices on small balls are enough to find local inversions, which are
//! then sewn together by a covering scheme into a learned circuit that
//! prepares `|ψ⟩` on its system wires and `|0⟩`-seeded junk on ancillas.

pub mod circuit;
pub mod cli;
pub mod clifford;
pub mod covering;
pub mod error;
pub mod inversion;
pub mod json;
pub mod lattice;
pub mod linalg;
pub mod pipeline;
pub mod reconstruction;
pub mod rng;
pub mod shadows;
pub mod simulator;

pub use error::{Error, Result};
