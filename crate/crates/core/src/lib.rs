//! Polynomial diffusion models for market weights on the unit simplex.
//!
//! The crate covers parameter validation and classification
//! ([`model_params`]), exact moments from generator matrix exponentials
//! ([`generator`], [`bernstein`]), Monte Carlo simulation ([`sde_sim`]),
//! deflators, self-financing wealth and approximate optimal arbitrage
//! ([`deflator_hedge`]), and estimation from capitalization data
//! ([`calibration`]).

pub mod bernstein;
pub mod calibration;
pub mod deflator_hedge;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod model_params;
pub mod sde_sim;
pub mod simplex_poly;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
