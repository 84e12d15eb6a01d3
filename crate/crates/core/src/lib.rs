//! Latent Wasserstein GAN at desk scale.

pub mod autodiff;
pub mod datasets;
pub mod dimsel;
pub mod error;
pub mod latent;
pub mod models;
pub mod nn;
pub mod objective;
pub mod otoracle;
pub mod rng;
pub mod trainer;

pub use autodiff::{Graph, Tensor, Var};
pub use datasets::{Dataset, DatasetKind};
pub use error::{Error, Result};
pub use latent::RankMask;
pub use models::{toy_model, AnyModel, Architecture, LwganModel, Mode};
