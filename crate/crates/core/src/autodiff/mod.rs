//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records operations on [`Var`]s. [`Graph::grad`] walks the
//! tape backwards; with `create_graph` set it records the backward pass as
//! ordinary graph nodes, which is what the gradient penalty needs to be
//! differentiated with respect to the critic parameters.
//!
//! Conventions at non-differentiable points: ReLU has derivative 0 at 0,
//! LeakyReLU has derivative `alpha` at 0, and the row-wise ℓ₂ norm has the
//! zero vector as its gradient at the origin.

mod backward;
mod check;
mod graph;
mod tensor;

pub use check::finite_diff_check;
pub(crate) use graph::sigmoid;
pub use graph::{Graph, NodeId, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
