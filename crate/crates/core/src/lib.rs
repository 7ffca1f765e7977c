//! Synthetic-aperture angle-of-arrival estimation from a moving receiver.

pub mod aoa;
pub mod channel;
pub mod crb;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod ingest;
pub mod noise;
mod phasor;
pub mod trajgen;

pub use error::{Error, Result};
