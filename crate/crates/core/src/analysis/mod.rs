//! Verification of the family's second moments, norms, truncation behaviour
//! and statistical-dimension arithmetic.

mod bounds;
mod combinatorics;
mod moments;
mod verify;

pub use bounds::*;
pub use combinatorics::*;
pub use moments::*;
pub use verify::*;
