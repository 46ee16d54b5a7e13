pub mod bath;
pub mod config;
pub mod dmd;
pub mod error;
pub mod gme;
pub mod grid;
pub mod kernels;
pub mod numerics;
pub mod propagator;
pub mod runner;

pub use error::{Error, Result};
