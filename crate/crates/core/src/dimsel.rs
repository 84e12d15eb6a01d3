//! Intrinsic-dimension selection: rank scores, data-driven penalty weight
//! and bootstrap uncertainty.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::sample_latent;
use crate::models::LwganModel;
use crate::objective::{rank_score, smallest_argmin, LossBreakdown};
use crate::rng::{self, child_seed, streams};
use crate::trainer::{LwganTrainer, TrainConfig};

/// Rows evaluated per forward pass when scoring the full dataset.
const EVAL_CHUNK: usize = 2048;

/// `ℓ̂(θ, A_s)` over all rows of `data` for `s = 1..=d`. Each rank gets
/// its own latent sample from a stream derived from `eval_seed` and `s`.
pub fn rank_losses(model: &LwganModel, data: &Array2<f64>, eval_seed: u64) -> Result<Vec<LossBreakdown>> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot score an empty dataset".into()));
    }
    (1..=model.d())
        .into_par_iter()
        .map(|s| {
            let mask = model.mask(s)?;
            let mut rng = rng::stream(child_seed(eval_seed, s as u64), streams::EVAL);
            let z = sample_latent(&mut rng, n, mask);
            let (mut recon, mut f_rec, mut f_gen) = (0.0, 0.0, 0.0);
            for start in (0..n).step_by(EVAL_CHUNK) {
                let end = (start + EVAL_CHUNK).min(n);
                let x = data.slice(s![start..end, ..]).to_owned();
                let x_rec = model.reconstruct(&x, s)?;
                recon += (&x - &x_rec)
                    .rows()
                    .into_iter()
                    .map(|r| r.dot(&r).sqrt())
                    .sum::<f64>();
                f_rec += model.criticize(&x_rec, s)?.sum();
                let zc = z.slice(s![start..end, ..]).to_owned();
                f_gen += model.criticize(&model.generate(&zc)?, s)?.sum();
            }
            let n = n as f64;
            let loss = LossBreakdown::new(recon / n, (f_rec - f_gen) / n);
            if !loss.total.is_finite() {
                return Err(Error::NonFinite(format!("V̂ at rank {s}")));
            }
            Ok(loss)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankScoreRow {
    pub s: usize,
    pub v_hat: f64,
    pub rho_hat: f64,
    pub recon: f64,
}

/// Scores for every rank plus the selected dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankScoreTable {
    pub rows: Vec<RankScoreRow>,
    pub lambda: f64,
    /// Smallest minimiser of `ρ̂`.
    pub r_hat: usize,
}

impl RankScoreTable {
    /// Builds the table from `V̂` and reconstruction errors per rank.
    pub fn from_values(v_hat: &[f64], recon: &[f64], lambda: f64) -> Result<Self> {
        if v_hat.len() != recon.len() {
            return Err(Error::InvalidArgument("V̂ and reconstruction lengths differ".into()));
        }
        let rho = rank_score(v_hat, lambda)?;
        let r_hat = smallest_argmin(&rho).expect("non-empty");
        let rows = (0..v_hat.len())
            .map(|i| RankScoreRow {
                s: i + 1,
                v_hat: v_hat[i],
                rho_hat: rho[i],
                recon: recon[i],
            })
            .collect();
        Ok(Self { rows, lambda, r_hat })
    }

    pub fn v_hat(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.v_hat).collect()
    }

    pub fn rho_hat(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rho_hat).collect()
    }

    /// Same `V̂` scored under a different penalty weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let recon: Vec<f64> = self.rows.iter().map(|r| r.recon).collect();
        Self::from_values(&self.v_hat(), &recon, lambda)
    }

    /// Whether the stored scores equal `V̂ + λ s` exactly.
    pub fn is_consistent(&self) -> bool {
        rank_score(&self.v_hat(), self.lambda).is_ok_and(|rho| rho == self.rho_hat())
            && smallest_argmin(&self.rho_hat()) == Some(self.r_hat)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,V_hat,rho_hat,recon\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:?},{:?},{:?}\n", r.s, r.v_hat, r.rho_hat, r.recon));
        }
        out
    }
}

/// Rank scores of a trained model over `data` with penalty `lambda`.
pub fn estimate_rank(
    model: &LwganModel,
    data: &Array2<f64>,
    lambda: f64,
    eval_seed: u64,
) -> Result<RankScoreTable> {
    let losses = rank_losses(model, data, eval_seed)?;
    let v: Vec<f64> = losses.iter().map(|l| l.total).collect();
    let recon: Vec<f64> = losses.iter().map(|l| l.reconstruction).collect();
    RankScoreTable::from_values(&v, &recon, lambda)
}

/// Settings of the penalty-weight selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    /// Number of subsets `K̃`.
    pub subsets: usize,
    /// Fine-tuning iterations `T̃` per subset.
    pub iterations: usize,
    /// Fraction of rows drawn (without replacement) for each subset.
    pub fraction: f64,
    pub exponent: f64,
    pub lambda_min: f64,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            subsets: 50,
            iterations: 20,
            fraction: 0.5,
            exponent: 0.8,
            lambda_min: 1e-8,
        }
    }
}

/// Outcome of the penalty-weight selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// Standard error of the column mean at `r_tilde`.
    pub se: f64,
    /// Smallest minimiser of the column means of `v_matrix`.
    pub r_tilde: usize,
    /// `K̃ × d` matrix of `V̂_k(s)`.
    pub v_matrix: Vec<Vec<f64>>,
}

/// `λ = max(SE^exponent, λ_min)` from a `K̃ × d` matrix of per-subset
/// losses, where SE is the sample standard deviation of column `r̃`
/// divided by `√K̃` and `r̃` the smallest minimiser of the column means.
pub fn lambda_from_matrix(v: &[Vec<f64>], exponent: f64, lambda_min: f64) -> Result<LambdaSelection> {
    let k = v.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 subsets, got {k}")));
    }
    let d = v[0].len();
    if d == 0 || v.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidArgument("ragged V̂ matrix".into()));
    }
    if v.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("V̂ matrix".into()));
    }
    let means: Vec<f64> = (0..d)
        .map(|s| v.iter().map(|row| row[s]).sum::<f64>() / k as f64)
        .collect();
    let r_tilde = smallest_argmin(&means).expect("d ≥ 1");
    let col = r_tilde - 1;
    let mean = means[col];
    let var = v.iter().map(|row| (row[col] - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let se = (var / k as f64).sqrt();
    let lambda = se.powf(exponent).max(lambda_min);
    Ok(LambdaSelection {
        lambda,
        se,
        r_tilde,
        v_matrix: v.to_vec(),
    })
}

/// Data-driven penalty weight. Each subset is a uniformly drawn
/// `fraction` of the rows; the converged `model` is fine-tuned on it for
/// `T̃` iterations (all parameters, fresh optimizer state) and `V̂_k(s)` is
/// evaluated on the same subset.
pub fn select_lambda(
    model: &LwganModel,
    data: &Array2<f64>,
    config: &LambdaConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<LambdaSelection> {
    if config.subsets < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 subsets, got {}",
            config.subsets
        )));
    }
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("subset fraction {} outside (0, 1]", config.fraction)));
    }
    let n = data.nrows();
    let size = ((n as f64) * config.fraction).floor() as usize;
    if size < train.batch_size {
        return Err(Error::InvalidArgument(format!(
            "subsets of {size} rows are smaller than the batch size {}",
            train.batch_size
        )));
    }
    let rows: Vec<Vec<f64>> = (0..config.subsets)
        .into_par_iter()
        .map(|k| {
            let sub_seed = child_seed(seed, k as u64);
            let mut rng = rng::stream(sub_seed, streams::SUBSET);
            let idx = index::sample(&mut rng, n, size).into_vec();
            let subset = data.select(Axis(0), &idx);
            let tune = TrainConfig {
                iterations: config.iterations,
                tolerance: 0.0,
                seed: sub_seed,
                ..train.clone()
            };
            let tuned = LwganTrainer::new(model.clone(), tune, &subset)?.run()?.model;
            let losses = rank_losses(&tuned, &subset, sub_seed)?;
            Ok(losses.iter().map(|l| l.total).collect())
        })
        .collect::<Result<_>>()?;
    lambda_from_matrix(&rows, config.exponent, config.lambda_min)
}

/// Settings of the bootstrap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub rounds: usize,
    /// Simulated sample size `B`; `None` uses the original `n`.
    pub n_boot: Option<usize>,
    /// Start each round from the fitted parameters rather than afresh.
    pub warm_start: bool,
    /// Training iterations per round.
    pub iterations: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            n_boot: None,
            warm_start: true,
            iterations: 50,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub rounds: usize,
    /// `r̂` re-estimated in each round, in round order.
    pub estimates: Vec<usize>,
    /// Count of rounds per estimated rank.
    pub frequencies: BTreeMap<usize, usize>,
}

impl BootstrapSummary {
    pub fn from_estimates(estimates: Vec<usize>) -> Self {
        let mut frequencies = BTreeMap::new();
        for &r in &estimates {
            *frequencies.entry(r).or_insert(0) += 1;
        }
        Self {
            rounds: estimates.len(),
            estimates,
            frequencies,
        }
    }

    /// Most frequent rank (smallest on ties) and its share of the rounds.
    pub fn mode(&self) -> Option<(usize, f64)> {
        let (&r, &count) = self
            .frequencies
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
        Some((r, count as f64 / self.rounds as f64))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,r_boot\n");
        for (i, r) in self.estimates.iter().enumerate() {
            out.push_str(&format!("{},{r}\n", i + 1));
        }
        out
    }
}

/// Bootstrap distribution of `r̂`: each round simulates `B` points
/// `Ĝ(A_r̂ Z₀)`, retrains (warm or cold) and re-scores with the same
/// `lambda`.
pub fn bootstrap_dimension(
    model: &LwganModel,
    r_hat: usize,
    lambda: f64,
    n_default: usize,
    config: &BootstrapConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<BootstrapSummary> {
    let mask = model.mask(r_hat)?;
    let n_boot = config.n_boot.unwrap_or(n_default);
    if config.rounds > 0 && n_boot < train.batch_size {
        return Err(Error::InvalidArgument(format!(
            "bootstrap sample size {n_boot} is below the batch size {}",
            train.batch_size
        )));
    }
    let estimates = (0..config.rounds)
        .into_par_iter()
        .map(|b| {
            let round_seed = child_seed(seed, b as u64);
            let mut rng = rng::stream(round_seed, streams::BOOTSTRAP);
            let sample = model.generate(&sample_latent(&mut rng, n_boot, mask))?;
            let start = if config.warm_start {
                model.clone()
            } else {
                model.reinitialized(round_seed)?
            };
            let cfg = TrainConfig {
                iterations: config.iterations,
                seed: round_seed,
                ..train.clone()
            };
            let fitted = LwganTrainer::new(start, cfg, &sample)?.run()?.model;
            Ok(estimate_rank(&fitted, &sample, lambda, round_seed)?.r_hat)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapSummary::from_estimates(estimates))
}
