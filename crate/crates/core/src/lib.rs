//! Optical bistability of N two-level atoms in a driven ring cavity, in the
//! semiclassical mean-field limit.
//!
//! Rates are in units of the cavity field decay rate κ.

pub mod cli;
pub mod cubic;
pub mod dynamics;
pub mod error;
pub mod params;
pub mod phases;
pub mod spectra;
pub mod steadystate;

pub use error::{Error, Result};
