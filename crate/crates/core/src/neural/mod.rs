//! Small differentiable kernel used to train the sequence models.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod params;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use lstm::{Dense, Lstm};
pub use params::{Gradients, ParamId, ParamSet, Tensor};
pub use tape::{bce_loss, sigmoid, Tape, Var};
