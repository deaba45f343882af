//! Numerical laboratory for Ricci flow and cutoff-localized Ricci flow on
//! symmetry-reduced geometries.

pub mod cover;
pub mod error;
pub mod flow;
pub mod metric;
pub mod monitor;
pub mod par;
pub mod transfer;

pub use error::{Error, Result};
