//! Statistical-query oracles, distinguishing games, learning-to-distinguishing
//! reductions and gradient descent through inner-product queries.

mod engine;
mod game;
mod gd;
mod losses;
mod oracle;
mod query;
mod reductions;
mod specs;

pub use engine::*;
pub use game::*;
pub use gd::*;
pub use losses::*;
pub use oracle::*;
pub use query::*;
pub use reductions::*;
pub use specs::*;
