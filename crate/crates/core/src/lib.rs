//! Spatial dependence reconstruction for post-processed precipitation
//! forecasts with discrete R-vine copulas.

pub mod areapred;
pub mod bicop;
pub mod config;
pub mod dataset;
mod error;
pub mod grid;
pub mod marginals;
pub mod rng;
pub mod rvine;
pub mod shuffle;
pub mod stats;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
