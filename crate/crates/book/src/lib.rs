//! Runs the guide's listings as doctests. One module per chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/lattices.md")]
pub mod lattices {}

#[doc = include_str!("../../../book/src/circuits.md")]
pub mod circuits {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/inversions.md")]
pub mod inversions {}

#[doc = include_str!("../../../book/src/reconstruction.md")]
pub mod reconstruction {}

#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
