//! Elo ratings as a Markov chain under the Bradley–Terry–Luce model.
//!
//! The crate covers four layers:
//!
//! - [`rating`], [`graph`], [`rng`]: BTL primitives, comparison graphs,
//!   match-up distributions and reproducible random streams.
//! - [`project`] and [`spectral`]: projection onto the capped zero-sum
//!   polytope, Laplacians, spectral gaps and the derived mixing quantities.
//! - [`elo`]: the sequential, parallel and noisy Elo chains, time averages,
//!   coupled runs and equilibrium statistics.
//! - [`design`] and [`bench`]: fastest-mixing tournament design, matching
//!   samplers, graph generators and the experiment runner.

pub mod bench;
pub mod design;
pub mod elo;
pub mod error;
pub mod graph;
pub mod project;
pub mod rating;
pub mod rng;
pub mod spectral;

pub use error::{EloError, Result};
pub use graph::{ComparisonGraph, MatchupDistribution, Normalization};
pub use rating::{sigmoid, win_probability, RatingVector, StepSize};
pub use rng::RngStream;
