//! Exact symbolic engine for quasi-Stäckel Hamiltonian systems.
//!
//! The crate builds the Hamiltonian families in Viète coordinates, deforms them
//! into non-autonomous Frobenius-integrable systems, relates magnetic and
//! non-magnetic representations by time-dependent canonical maps, and reduces
//! the one-dimensional cases to Painlevé equations.

pub mod canonmap;
pub mod cli;
pub mod coeffring;
pub mod error;
pub mod frobenius;
pub mod multitime;
pub mod painleve;
pub mod parse;
pub mod phasepoly;
pub mod stackelgen;

pub use coeffring::{cf, CoeffExpr, Q};
pub use error::{Error, Result};
pub use phasepoly::{pb, PhaseExpr, PhasePoint};
