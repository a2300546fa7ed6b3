//! Soccer match summarization from event streams and broadcast audio.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod hma;
pub mod io;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod proposals;
pub mod ranking;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
