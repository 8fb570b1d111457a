//! Finite spectral triples and quantitative bounds on their distance.

pub mod algebra;
pub mod continuity;
pub mod covariant;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod kantorovich;
pub mod matrix;
pub mod modular;
pub mod qtorus;
pub mod triple;
pub mod tunnel;

pub use error::{Error, Result};
