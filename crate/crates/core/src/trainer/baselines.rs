//! WGAN and WAE baselines.

use ndarray::Array2;

use super::config::{ConvergenceMonitor, TrainConfig};
use super::lwgan::{check_data, diverged, draw_batch, draw_eps, step_error, with_joint, TrainOutcome};
use super::metrics::{IterRecord, TrainHistory};
use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::latent::standard_normal;
use crate::models::{WaeModel, WganModel};
use crate::nn::{AdamConfig, AdamState, Mlp};
use crate::objective::{critic_mean, gradient_penalty_var, interpolate};
use crate::rng::{self, streams, Rng};

/// One ascent step of an unconditioned critic on
/// `mean f(a) − mean f(b) − λ_GP · GP` with interpolates between `a` and
/// `b`. Returns the gap and penalty before the step.
fn critic_ascent(
    critic: &mut Mlp,
    opt: &mut AdamState,
    a: &Array2<f64>,
    b: &Array2<f64>,
    eps: &[f64],
    gp_weight: f64,
    iter: usize,
) -> Result<(f64, f64)> {
    let x_hat = interpolate(a, b, eps)?;
    let grads = {
        let g = Graph::new();
        let bound = critic.bind(&g);
        let gap = critic
            .forward_bound(&bound, g.constant(a.clone()))?
            .mean()
            .sub(&critic.forward_bound(&bound, g.constant(b.clone()))?.mean())?;
        let gp = gradient_penalty_var(critic, &bound, &x_hat, None)?;
        let objective = gap.sub(&gp.scale(gp_weight))?;
        let values = (gap.item()?, gp.item()?);
        diverged(iter, "critic gap", values.0)?;
        diverged(iter, "gradient penalty", values.1)?;
        (values, g.grad_values(objective, &bound)?)
    };
    opt.step(&mut critic.params, &grads.1, true)
        .map_err(|e| step_error(iter, e))?;
    Ok(grads.0)
}

/// WGAN with gradient penalty: the critic maximises
/// `mean f(X) − mean f(G(Z))`, the generator minimises it, `Z ~ N(0, I_d)`.
pub fn train_wgan(
    model: WganModel,
    config: &TrainConfig,
    data: &Array2<f64>,
) -> Result<TrainOutcome<WganModel>> {
    config.validate()?;
    check_data(data, model.p(), config.batch_size)?;
    let mut model = model;
    let d = model.d();
    let m = config.batch_size;
    let mut rng = rng::stream(config.seed, streams::TRAIN);
    let mut critic_opt = AdamState::new(config.critic_adam, &model.critic.params);
    let mut gen_opt = AdamState::new(config.model_adam, &model.generator.params);
    let mut history = TrainHistory::default();
    let mut monitor = ConvergenceMonitor::new(config.window, config.tolerance);
    let mut converged_at = None;

    for iter in 1..=config.iterations {
        let mut gp = 0.0;
        for _ in 0..config.critic_steps {
            let x = draw_batch(&mut rng, data, m);
            let z = standard_normal(&mut rng, m, d);
            let eps = draw_eps(&mut rng, m);
            let fake = model.generator.eval(&z)?;
            gp = critic_ascent(&mut model.critic, &mut critic_opt, &x, &fake, &eps, config.gp_weight, iter)?.1;
        }

        let x = draw_batch(&mut rng, data, m);
        let z = standard_normal(&mut rng, m, d);
        let f_real = critic_mean(&model.critic, &x, None)?;
        let (gap_pre, grads) = {
            let g = Graph::new();
            let gen = model.generator.bind(&g);
            let crit = model.critic.bind(&g);
            let fake = model.generator.forward_bound(&gen, g.constant(z.clone()))?;
            let f_fake = model.critic.forward_bound(&crit, fake)?.mean();
            let gap = f_real - f_fake.item()?;
            diverged(iter, "critic gap", gap)?;
            (gap, g.grad_values(f_fake.neg(), &gen)?)
        };
        gen_opt
            .step(&mut model.generator.params, &grads, false)
            .map_err(|e| step_error(iter, e))?;
        let gap_post = f_real - critic_mean(&model.critic, &model.generator.eval(&z)?, None)?;
        diverged(iter, "critic gap", gap_post)?;

        let record = IterRecord {
            iter,
            rank_s: d,
            critic_gap_pre: gap_pre,
            critic_gap_post: gap_post,
            recon: 0.0,
            gp,
        };
        history.records.push(record);
        if monitor.push(record.loss()) {
            converged_at = Some(iter);
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        converged_at,
    })
}

/// Median of the pairwise Euclidean distances among the rows of `a`.
pub fn median_pairwise_distance(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let diff = &a.row(i) - &a.row(j);
            d.push(diff.dot(&diff).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    }
}

/// `exp(−‖a_i − b_j‖² / (2h²))` as an `n×m` graph node.
fn gaussian_kernel<'g>(a: Var<'g>, b: Var<'g>, h: f64) -> Result<Var<'g>> {
    let (n, _) = a.dim();
    let (m, _) = b.dim();
    let aa = a.square().sum_cols().broadcast_cols(m)?;
    let bb = b.square().sum_cols().transpose().broadcast_rows(n)?;
    let ab = a.matmul(&b.transpose())?.scale(-2.0);
    let sq = aa.add(&bb)?.add(&ab)?;
    Ok(sq.scale(-1.0 / (2.0 * h * h)).exp())
}

/// Biased squared MMD between the rows of `a` and `b` with a Gaussian
/// kernel of bandwidth `h`.
pub fn mmd_var<'g>(a: Var<'g>, b: Var<'g>, h: f64) -> Result<Var<'g>> {
    let kaa = gaussian_kernel(a, a, h)?.mean();
    let kbb = gaussian_kernel(b, b, h)?.mean();
    let kab = gaussian_kernel(a, b, h)?.mean();
    kaa.add(&kbb)?.sub(&kab.scale(2.0))
}

/// Bandwidth used by the WAE penalty: median pairwise distance of the
/// pooled sample, or 1 when that is degenerate.
pub fn mmd_bandwidth(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let pooled = ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()]).expect("same width");
    let h = median_pairwise_distance(&pooled);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1.0
    }
}

/// Detached squared MMD with the median-distance bandwidth.
pub fn mmd(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    let h = mmd_bandwidth(a, b);
    let g = Graph::new();
    mmd_var(g.constant(a.clone()), g.constant(b.clone()), h)?.item()
}

/// WAE with an MMD penalty: minimises
/// `mean ‖X − G(Q(X))‖ + λ · MMD²(Q(X), Z)` over encoder and generator.
pub fn train_wae(
    model: WaeModel,
    config: &TrainConfig,
    data: &Array2<f64>,
) -> Result<TrainOutcome<WaeModel>> {
    config.validate()?;
    check_data(data, model.p(), config.batch_size)?;
    let mut model = model;
    let d = model.d();
    let m = config.batch_size;
    let mut rng = rng::stream(config.seed, streams::TRAIN);
    let joint: Vec<_> = model.encoder.params.iter().chain(&model.generator.params).cloned().collect();
    let mut opt = AdamState::new(config.model_adam, &joint);
    let mut history = TrainHistory::default();
    let mut monitor = ConvergenceMonitor::new(config.window, config.tolerance);
    let mut converged_at = None;

    for iter in 1..=config.iterations {
        let x = draw_batch(&mut rng, data, m);
        let z = standard_normal(&mut rng, m, d);
        let h = mmd_bandwidth(&model.encoder.eval(&x)?, &z);
        let (recon, div, grads) = {
            let g = Graph::new();
            let enc = model.encoder.bind(&g);
            let gen = model.generator.bind(&g);
            let xv = g.constant(x.clone());
            let q = model.encoder.forward_bound(&enc, xv)?;
            let rec = model.generator.forward_bound(&gen, q)?;
            let recon = xv.sub(&rec)?.norm_rows().mean();
            let div = mmd_var(q, g.constant(z.clone()), h)?;
            let total = recon.add(&div.scale(config.wae_lambda))?;
            let wrt: Vec<_> = enc.iter().chain(&gen).copied().collect();
            let (r, dv) = (recon.item()?, div.item()?);
            diverged(iter, "reconstruction", r)?;
            diverged(iter, "mmd", dv)?;
            (r, dv, g.grad_values(total, &wrt)?)
        };
        with_joint(&mut model.encoder.params, &mut model.generator.params, |joint| {
            opt.step(joint, &grads, false)
        })
        .map_err(|e| step_error(iter, e))?;
        let div_post = mmd_after(&model, &x, &z, h)?;

        let record = IterRecord {
            iter,
            rank_s: d,
            critic_gap_pre: div,
            critic_gap_post: div_post,
            recon,
            gp: 0.0,
        };
        history.records.push(record);
        if monitor.push(recon + config.wae_lambda * div) {
            converged_at = Some(iter);
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        converged_at,
    })
}

fn mmd_after(model: &WaeModel, x: &Array2<f64>, z: &Array2<f64>, h: f64) -> Result<f64> {
    let g = Graph::new();
    let q = g.constant(model.encoder.eval(x)?);
    mmd_var(q, g.constant(z.clone()), h)?.item()
}

/// Fits a critic between two fixed samples by gradient-penalised ascent
/// and returns its final dual estimate `mean f(a) − mean f(b)` of `W₁`.
pub fn fit_critic(
    critic: &mut Mlp,
    a: &Array2<f64>,
    b: &Array2<f64>,
    steps: usize,
    gp_weight: f64,
    adam: AdamConfig,
    rng: &mut Rng,
) -> Result<f64> {
    let mut opt = AdamState::new(adam, &critic.params);
    for iter in 1..=steps {
        let eps = draw_eps(rng, a.nrows());
        critic_ascent(critic, &mut opt, a, b, &eps, gp_weight, iter)?;
    }
    Ok(critic_mean(critic, a, None)? - critic_mean(critic, b, None)?)
}
