//! Fully connected layers and the Adam optimizer.

mod adam;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{Activation, Mlp, MlpSpec, Param};
