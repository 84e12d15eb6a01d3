//! The degenerate normal latent law `N(0, A_s)` and rank conditioning.
//!
//! `A_s = diag(1, …, 1, 0, …, 0)` keeps the first `s` of `d` coordinates.
//! Masking is implemented as multiplication by a 0/1 row so that gradients
//! through the zeroed coordinates are exactly zero and graphs stay regular.

use ndarray::{Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// The pair `(d, s)` standing for `A_s` and `e_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankMask {
    d: usize,
    s: usize,
}

impl RankMask {
    pub fn new(d: usize, s: usize) -> Result<Self> {
        if s == 0 || s > d {
            return Err(Error::RankOutOfRange { s, d });
        }
        Ok(Self { d, s })
    }

    /// `A_d`, the identity mask.
    pub fn full(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Diagonal of `A_s` as a `1×d` row.
    pub fn row(&self) -> Array2<f64> {
        Array2::from_shape_fn((1, self.d), |(_, j)| if j < self.s { 1.0 } else { 0.0 })
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.d {
            return Err(Error::ShapeMismatch {
                op: "apply_mask",
                lhs: vec![width],
                rhs: vec![self.d],
            });
        }
        Ok(())
    }

    /// `z A_s` for each row of `z`.
    pub fn apply(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(z.ncols())?;
        let mut out = z.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            row.iter_mut().skip(self.s).for_each(|v| *v = 0.0);
        }
        Ok(out)
    }

    /// Graph version of [`RankMask::apply`].
    pub fn apply_var<'g>(&self, z: Var<'g>) -> Result<Var<'g>> {
        let (n, width) = z.dim();
        self.check_width(width)?;
        if self.s == self.d {
            return Ok(z);
        }
        let mask = self.row().broadcast((n, self.d)).unwrap().to_owned();
        z.mul(&z.graph().constant(mask))
    }
}

/// Applies `A_s` to every row of `z`.
pub fn apply_mask(mask: RankMask, z: &Tensor) -> Result<Tensor> {
    Ok(Tensor::from_array(mask.apply(z.array())?))
}

/// `n×d` matrix of iid standard normals.
pub fn standard_normal(rng: &mut Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng))
}

/// `n` iid draws from `N(0, A_s)`: standard normal in the first `s`
/// columns, exact zeros elsewhere. The full `d` columns are drawn so the
/// stream position does not depend on `s`.
pub fn sample_latent(rng: &mut Rng, n: usize, mask: RankMask) -> Array2<f64> {
    let z = standard_normal(rng, n, mask.d());
    mask.apply(&z).expect("width matches by construction")
}

/// `e_s` as a `1×d` row.
pub fn one_hot(d: usize, s: usize) -> Result<Array2<f64>> {
    RankMask::new(d, s)?;
    Ok(Array2::from_shape_fn((1, d), |(_, j)| if j + 1 == s { 1.0 } else { 0.0 }))
}
