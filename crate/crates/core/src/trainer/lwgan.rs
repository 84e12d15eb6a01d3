use ndarray::Array2;
use rand::seq::index;
use rand::Rng as _;

use super::config::{ConvergenceMonitor, TrainConfig};
use super::metrics::{IterRecord, TrainHistory};
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::latent::sample_latent;
use crate::models::LwganModel;
use crate::nn::{AdamState, Param};
use crate::objective::{critic_mean, gradient_penalty_var, interpolate, loss_vars, LossBreakdown};
use crate::rng::{self, streams, Rng};

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: TrainHistory,
    /// Iteration at which the plateau rule fired, if it did.
    pub converged_at: Option<usize>,
}

pub(crate) fn check_data(data: &Array2<f64>, p: usize, batch: usize) -> Result<()> {
    if data.ncols() != p {
        return Err(Error::ShapeMismatch {
            op: "train",
            lhs: data.shape().to_vec(),
            rhs: vec![p],
        });
    }
    if data.nrows() < batch {
        return Err(Error::InvalidArgument(format!(
            "need at least batch_size = {batch} rows, got {}",
            data.nrows()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    Ok(())
}

pub(crate) fn draw_batch(rng: &mut Rng, data: &Array2<f64>, m: usize) -> Array2<f64> {
    let idx = index::sample(rng, data.nrows(), m).into_vec();
    data.select(ndarray::Axis(0), &idx)
}

pub(crate) fn draw_eps(rng: &mut Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random::<f64>()).collect()
}

/// Runs `f` on the concatenation of two parameter lists and puts them
/// back, so one optimizer can own a joint parameter group.
pub(crate) fn with_joint<T>(
    a: &mut Vec<Param>,
    b: &mut Vec<Param>,
    f: impl FnOnce(&mut [Param]) -> T,
) -> T {
    let split = a.len();
    let mut joint = std::mem::take(a);
    joint.append(b);
    let out = f(&mut joint);
    *b = joint.split_off(split);
    *a = joint;
    out
}

pub(crate) fn diverged(iter: usize, what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            iter,
            what: what.to_string(),
        })
    }
}

/// Turns an optimizer's non-finite-gradient error into a divergence at
/// `iter`.
pub(crate) fn step_error(iter: usize, err: Error) -> Error {
    match err {
        Error::NonFinite(what) => Error::Diverged { iter, what },
        other => other,
    }
}

/// Stepwise LWGAN trainer. Holds the model, both optimizer states (which
/// persist across outer iterations) and the training stream.
pub struct LwganTrainer<'a> {
    pub model: LwganModel,
    config: TrainConfig,
    data: &'a Array2<f64>,
    rng: Rng,
    critic_opt: AdamState,
    model_opt: AdamState,
    iter: usize,
}

impl<'a> LwganTrainer<'a> {
    /// Fresh optimizer state around `model`; the training stream comes from
    /// `config.seed`.
    pub fn new(model: LwganModel, config: TrainConfig, data: &'a Array2<f64>) -> Result<Self> {
        config.validate()?;
        check_data(data, model.p(), config.batch_size)?;
        let critic_opt = AdamState::new(config.critic_adam, &model.critic.params);
        let joint: Vec<Param> = model
            .encoder
            .params
            .iter()
            .chain(&model.generator.params)
            .cloned()
            .collect();
        let model_opt = AdamState::new(config.model_adam, &joint);
        let rng = rng::stream(config.seed, streams::TRAIN);
        Ok(Self {
            model,
            config,
            data,
            rng,
            critic_opt,
            model_opt,
            iter: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn iterations_done(&self) -> usize {
        self.iter
    }

    /// One critic update at rank `s`: ascent on
    /// `mean f(G(Q(X))) − mean f(G(A_s Z₀)) − λ_GP · GP`. Returns the gap
    /// and penalty measured before the update.
    pub fn critic_step(&mut self, s: usize) -> Result<(f64, f64)> {
        let model = &self.model;
        let mask = model.mask(s)?;
        let m = self.config.batch_size;
        let x = draw_batch(&mut self.rng, self.data, m);
        let z = sample_latent(&mut self.rng, m, mask);
        let eps = draw_eps(&mut self.rng, m);

        let x_rec = model.reconstruct(&x, s)?;
        let x_gen = model.generate(&z)?;
        let x_hat = interpolate(&x, &x_gen, &eps)?;

        let g = Graph::new();
        let bound = model.critic.bind(&g);
        let f_rec = model.criticize_var_with(&bound, g.constant(x_rec), mask)?;
        let f_gen = model.criticize_var_with(&bound, g.constant(x_gen), mask)?;
        let gap = f_rec.mean().sub(&f_gen.mean())?;
        let gp = gradient_penalty_var(&model.critic, &bound, &x_hat, Some(mask))?;
        let objective = gap.sub(&gp.scale(self.config.gp_weight))?;
        let (gap_v, gp_v) = (gap.item()?, gp.item()?);
        let iter = self.iter + 1;
        diverged(iter, "critic gap", gap_v)?;
        diverged(iter, "gradient penalty", gp_v)?;

        let grads = g.grad_values(objective, &bound)?;
        self.critic_opt
            .step(&mut self.model.critic.params, &grads, true)
            .map_err(|e| step_error(iter, e))?;
        Ok((gap_v, gp_v))
    }

    /// One encoder/generator descent step on `ℓ̂` at rank `s`. Returns the
    /// loss before the update and the critic gap on the same batch after it.
    pub fn model_step(&mut self, s: usize) -> Result<(LossBreakdown, f64)> {
        let mask = self.model.mask(s)?;
        let m = self.config.batch_size;
        let x = draw_batch(&mut self.rng, self.data, m);
        let z = sample_latent(&mut self.rng, m, mask);
        let iter = self.iter + 1;

        let (loss, grads) = {
            let model = &self.model;
            let g = Graph::new();
            let b = model.bind(&g);
            let v = loss_vars(model, &b, g.constant(x.clone()), g.constant(z.clone()), s)?;
            let loss = LossBreakdown::new(v.reconstruction.item()?, v.critic_gap.item()?);
            diverged(iter, "reconstruction", loss.reconstruction)?;
            diverged(iter, "critic gap", loss.critic_gap)?;
            let wrt: Vec<_> = b.encoder.iter().chain(&b.generator).copied().collect();
            (loss, g.grad_values(v.total, &wrt)?)
        };

        let LwganModel {
            encoder, generator, ..
        } = &mut self.model;
        let opt = &mut self.model_opt;
        with_joint(&mut encoder.params, &mut generator.params, |joint| {
            opt.step(joint, &grads, false)
        })
        .map_err(|e| step_error(iter, e))?;

        let model = &self.model;
        let post = critic_mean(&model.critic, &model.reconstruct(&x, s)?, Some(mask))?
            - critic_mean(&model.critic, &model.generate(&z)?, Some(mask))?;
        diverged(iter, "critic gap", post)?;
        Ok((loss, post))
    }

    /// One outer iteration: draw `s` uniformly from `1..=d`, run `L` critic
    /// steps, then one encoder/generator step.
    pub fn step(&mut self) -> Result<IterRecord> {
        let s = self.rng.random_range(1..=self.model.d());
        let mut gp = 0.0;
        for _ in 0..self.config.critic_steps {
            gp = self.critic_step(s)?.1;
        }
        let (loss, post) = self.model_step(s)?;
        self.iter += 1;
        Ok(IterRecord {
            iter: self.iter,
            rank_s: s,
            critic_gap_pre: loss.critic_gap,
            critic_gap_post: post,
            recon: loss.reconstruction,
            gp,
        })
    }

    /// Runs until `config.iterations` outer steps or the plateau rule.
    pub fn run(mut self) -> Result<TrainOutcome<LwganModel>> {
        let mut history = TrainHistory::default();
        let mut monitor = ConvergenceMonitor::new(self.config.window, self.config.tolerance);
        let mut converged_at = None;
        for _ in 0..self.config.iterations {
            let record = self.step()?;
            history.records.push(record);
            if monitor.push(record.loss()) {
                converged_at = Some(record.iter);
                break;
            }
        }
        Ok(TrainOutcome {
            model: self.model,
            history,
            converged_at,
        })
    }
}

/// Trains `model` on the rows of `data` under `config`.
pub fn train_lwgan(
    model: LwganModel,
    config: &TrainConfig,
    data: &Array2<f64>,
) -> Result<TrainOutcome<LwganModel>> {
    LwganTrainer::new(model, config.clone(), data)?.run()
}

