//! One-hidden-layer network families that are hard for statistical-query
//! learners: construction, Hermite analysis, oracle simulation and the
//! overfitting experiments.

pub mod activation;
pub mod analysis;
pub mod distributions;
pub mod error;
pub mod family;
pub mod hermite;
pub mod io;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod sqgame;
pub mod training;
