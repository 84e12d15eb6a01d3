//! Loss stack: per-sample loss, empirical loss, gradient penalty, critic
//! objective and rank scores.
//!
//! For a batch `X` and masked latents `Z = Z₀ A_s`,
//!
//! ```text
//! ℓ̂ = mean ‖X − G(Q(X))‖ + mean f(G(Q(X))) − mean f(G(Z))
//! ```
//!
//! with `Q` and `f` conditioned on `e_s`. The critic maximises the second
//! part; the encoder and generator minimise the whole.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::latent::RankMask;
use crate::models::{condition, condition_var, BoundLwgan, LwganModel};
use crate::nn::Mlp;

/// Batch means of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `mean ‖x − G(Q(x))‖`.
    pub reconstruction: f64,
    /// `mean f(G(Q(x))) − mean f(G(A_s z₀))`.
    pub critic_gap: f64,
    /// `reconstruction + critic_gap`.
    pub total: f64,
    /// Gradient penalty, when it was computed.
    pub gp: Option<f64>,
}

impl LossBreakdown {
    pub fn new(reconstruction: f64, critic_gap: f64) -> Self {
        Self {
            reconstruction,
            critic_gap,
            total: reconstruction + critic_gap,
            gp: None,
        }
    }
}

/// Graph-attached loss terms.
#[derive(Clone, Copy)]
pub struct LossVars<'g> {
    pub reconstruction: Var<'g>,
    pub critic_gap: Var<'g>,
    pub total: Var<'g>,
}

/// Builds `ℓ̂` on the graph for a batch `x` and already-masked latents `z`.
pub fn loss_vars<'g>(
    model: &LwganModel,
    b: &BoundLwgan<'g>,
    x: Var<'g>,
    z: Var<'g>,
    s: usize,
) -> Result<LossVars<'g>> {
    let x_rec = model.generate_var(b, model.encode_var(b, x, s)?)?;
    let reconstruction = x.sub(&x_rec)?.norm_rows().mean();
    let x_gen = model.generate_var(b, z)?;
    let critic_gap = model
        .criticize_var(b, x_rec, s)?
        .mean()
        .sub(&model.criticize_var(b, x_gen, s)?.mean())?;
    let total = reconstruction.add(&critic_gap)?;
    Ok(LossVars {
        reconstruction,
        critic_gap,
        total,
    })
}

fn check_batch(x: &Array2<f64>, z: &Array2<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if x.nrows() != z.nrows() {
        return Err(Error::ShapeMismatch {
            op: "empirical_loss",
            lhs: x.shape().to_vec(),
            rhs: z.shape().to_vec(),
        });
    }
    Ok(())
}

fn row_norms(a: &Array2<f64>) -> impl Iterator<Item = f64> + '_ {
    a.rows().into_iter().map(|r| r.dot(&r).sqrt())
}

/// Loss terms for rows `x` paired with already-masked latents `z`.
fn loss_terms(model: &LwganModel, x: &Array2<f64>, z: &Array2<f64>, s: usize) -> Result<LossBreakdown> {
    check_batch(x, z)?;
    let n = x.nrows() as f64;
    let x_rec = model.reconstruct(x, s)?;
    let reconstruction = row_norms(&(x - &x_rec)).sum::<f64>() / n;
    let f_rec = model.criticize(&x_rec, s)?.sum() / n;
    let f_gen = model.criticize(&model.generate(z)?, s)?.sum() / n;
    Ok(LossBreakdown::new(reconstruction, f_rec - f_gen))
}

/// `L(x, z; θ)` for a single row `x` (`1×p`) and a masked latent `z`
/// (`1×d`).
pub fn sample_loss(model: &LwganModel, x: &Array2<f64>, z: &Array2<f64>, s: usize) -> Result<f64> {
    if x.nrows() != 1 || z.nrows() != 1 {
        return Err(Error::InvalidArgument(format!(
            "sample_loss takes single rows, got {} and {}",
            x.nrows(),
            z.nrows()
        )));
    }
    Ok(loss_terms(model, x, z, s)?.total)
}

/// `ℓ̂(θ, A_s)` over the batch. `z0` is unmasked; `A_s` is applied here.
pub fn empirical_loss(
    model: &LwganModel,
    x: &Array2<f64>,
    z0: &Array2<f64>,
    s: usize,
) -> Result<LossBreakdown> {
    let z = model.mask(s)?.apply(z0)?;
    loss_terms(model, x, &z, s)
}

/// Interpolates `ε_i x_i + (1 − ε_i) y_i` row by row.
pub fn interpolate(x_real: &Array2<f64>, x_gen: &Array2<f64>, eps: &[f64]) -> Result<Array2<f64>> {
    if x_real.dim() != x_gen.dim() || eps.len() != x_real.nrows() {
        return Err(Error::ShapeMismatch {
            op: "interpolate",
            lhs: x_real.shape().to_vec(),
            rhs: vec![x_gen.nrows(), x_gen.ncols(), eps.len()],
        });
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidArgument(format!("interpolation weight {e} outside [0, 1]")));
    }
    let mut out = x_gen.clone();
    for ((mut o, r), &e) in out.axis_iter_mut(Axis(0)).zip(x_real.rows()).zip(eps) {
        o.zip_mut_with(&r, |g, &x| *g = e * x + (1.0 - e) * *g);
    }
    Ok(out)
}

/// `mean (‖∇ₓ f(x̂_i)‖ − 1)²` on the graph of the bound critic parameters,
/// differentiable with respect to them. `cond` appends `e_s` to the critic
/// input.
pub fn gradient_penalty_var<'g>(
    critic: &Mlp,
    bound: &[Var<'g>],
    x_hat: &Array2<f64>,
    cond: Option<RankMask>,
) -> Result<Var<'g>> {
    let graph = bound
        .first()
        .map(|v| v.graph())
        .ok_or_else(|| Error::InvalidArgument("critic has no parameters".into()))?;
    let x = graph.leaf(&Tensor::from_array(x_hat.clone()));
    let input = match cond {
        Some(mask) => condition_var(x, mask)?,
        None => x,
    };
    let out = critic.forward_bound(bound, input)?.sum();
    let grad = graph.grad(out, &[x], true)?.remove(0);
    let norms = grad.norm_rows();
    if let Some(bad) = norms.value().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient norm {bad} in penalty")));
    }
    Ok(norms.add_scalar(-1.0).square().mean())
}

/// Detached value of the gradient penalty at interpolates of `x_real` and
/// `x_gen` with per-row weights `eps`.
pub fn gradient_penalty(
    critic: &Mlp,
    x_real: &Array2<f64>,
    x_gen: &Array2<f64>,
    eps: &[f64],
    cond: Option<RankMask>,
) -> Result<f64> {
    let x_hat = interpolate(x_real, x_gen, eps)?;
    let graph = Graph::new();
    let bound = critic.bind(&graph);
    gradient_penalty_var(critic, &bound, &x_hat, cond)?.item()
}

/// `J(θ) = ℓ̂ + λ_GP · GP` for one batch. The interpolates mix `x` with
/// `G(A_s z₀)`.
pub fn critic_objective(
    model: &LwganModel,
    x: &Array2<f64>,
    z0: &Array2<f64>,
    eps: &[f64],
    s: usize,
    gp_weight: f64,
) -> Result<f64> {
    let mask = model.mask(s)?;
    let loss = empirical_loss(model, x, z0, s)?;
    if gp_weight == 0.0 {
        return Ok(loss.total);
    }
    let x_gen = model.generate(&mask.apply(z0)?)?;
    let gp = gradient_penalty(&model.critic, x, &x_gen, eps, Some(mask))?;
    Ok(loss.total + gp_weight * gp)
}

/// Detached critic values `f(x, e_s)` averaged over rows.
pub fn critic_mean(critic: &Mlp, x: &Array2<f64>, cond: Option<RankMask>) -> Result<f64> {
    let out = match cond {
        Some(mask) => critic.eval(&condition(x, mask)?)?,
        None => critic.eval(x)?,
    };
    Ok(out.sum() / x.nrows() as f64)
}

/// `ϱ̂(s) = V̂(s) + λ s` for `s = 1..=d`.
pub fn rank_score(v_hat: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if v_hat.is_empty() {
        return Err(Error::InvalidArgument("no ranks to score".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty weight {lambda} must be finite and ≥ 0")));
    }
    if let Some(s) = v_hat.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("V̂ at rank {}", s + 1)));
    }
    Ok(v_hat
        .iter()
        .enumerate()
        .map(|(i, v)| v + lambda * (i + 1) as f64)
        .collect())
}

/// One-based index of the smallest minimum.
pub fn smallest_argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i + 1)
}
