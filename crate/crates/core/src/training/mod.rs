//! Training an over-parameterized student on data labeled by a family member.

mod figures;
mod model;
mod train;

pub use figures::*;
pub use model::*;
pub use train::*;
