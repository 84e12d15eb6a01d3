//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `LWGAN_ACCEPTANCE=4,5,6` restricts the run to the listed criteria.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use lwgan_core::dimsel::{bootstrap_dimension, estimate_rank, select_lambda, BootstrapConfig, LambdaConfig};
use lwgan_core::latent::{sample_latent, standard_normal};
use lwgan_core::nn::{Activation, Mlp, MlpSpec, Param};
use lwgan_core::objective::{gradient_penalty, gradient_penalty_var, rank_score, smallest_argmin};
use lwgan_core::otoracle::{w1_brute, w1_exact};
use lwgan_core::rng::{self, child_seed, streams, Rng};
use lwgan_core::trainer::{train_lwgan, TrainConfig};
use lwgan_core::{toy_model, Architecture, DatasetKind, Graph, LwganModel, Tensor, Var};
use ndarray::Array2;
use rand::Rng as _;

const SEEDS: [u64; 3] = [0, 1, 2];
const N: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn toy_data(kind: DatasetKind, seed: u64) -> Array2<f64> {
    kind.generate(N, &mut rng::stream(seed, streams::DATA)).unwrap().into_rows()
}

fn random(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    standard_normal(rng, rows, cols)
}

/// Entries uniform on [−2, 2].
fn uniform(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-2.0..=2.0))
}

// ---------------------------------------------------------------- pipeline

struct PipelineRun {
    kind: DatasetKind,
    seed: u64,
    data: Array2<f64>,
    model: LwganModel,
    lambda: f64,
    r_hat: usize,
    v_hat: Vec<f64>,
    stopped_at: Option<usize>,
}

fn pipeline(kind: DatasetKind, seed: u64) -> PipelineRun {
    let data = toy_data(kind, seed);
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let out = train_lwgan(toy_model(kind, seed).unwrap(), &config, &data).unwrap();
    let (model, stopped_at) = (out.model, out.converged_at);
    let sel = select_lambda(&model, &data, &LambdaConfig::default(), &config, seed).unwrap();
    let table = estimate_rank(&model, &data, sel.lambda, seed).unwrap();
    PipelineRun {
        kind,
        seed,
        data,
        model,
        lambda: sel.lambda,
        r_hat: table.r_hat,
        v_hat: table.v_hat(),
        stopped_at,
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_1(runs: &[PipelineRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in DatasetKind::ALL {
        let rs: Vec<&PipelineRun> = runs.iter().filter(|r| r.kind == kind).collect();
        let correct = rs.iter().filter(|r| r.r_hat == kind.intrinsic_dim()).count();
        pass &= correct >= 2;
        let tried = rs.len();
        let hats: Vec<String> = rs.iter().map(|r| r.r_hat.to_string()).collect();
        parts.push(format!("{kind}: r̂ = [{}] want {} ({correct}/{tried} run)", hats.join(","), kind.intrinsic_dim()));
        for r in rs {
            println!(
                "    {kind} seed {}: plateau at {:?}, λ = {:.4}, V̂ = {}, r̂ = {}",
                r.seed,
                r.stopped_at,
                r.lambda,
                fmt_vec(&r.v_hat),
                r.r_hat
            );
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_2(runs: &[PipelineRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in DatasetKind::ALL {
        let run = runs.iter().find(|r| r.kind == kind).expect("one run per dataset");
        let train = TrainConfig {
            seed: run.seed,
            ..TrainConfig::default()
        };
        let boot = BootstrapConfig::default();
        let summary = bootstrap_dimension(
            &run.model,
            run.r_hat,
            run.lambda,
            run.data.nrows(),
            &boot,
            &train,
            child_seed(run.seed, 99),
        )
        .unwrap();
        let (mode, share) = summary.mode().expect("rounds > 0");
        let ok = summary.rounds == 100 && mode == run.r_hat && share >= 0.8;
        pass &= ok;
        parts.push(format!(
            "{kind}: r̂ = {}, mode {mode} at {:.0}% {:?}",
            run.r_hat,
            100.0 * share,
            summary.frequencies
        ));
    }
    outcome(pass, parts.join("; "))
}

fn reconstruction_error(model: &LwganModel, data: &Array2<f64>, s: usize) -> f64 {
    let rec = model.reconstruct(data, s).unwrap();
    (data - &rec).rows().into_iter().map(|r| r.dot(&r).sqrt()).sum::<f64>() / data.nrows() as f64
}

fn criterion_3(runs: &[PipelineRun]) -> Outcome {
    let full = runs
        .iter()
        .find(|r| r.kind == DatasetKind::SCurve)
        .expect("S-curve run");
    let config = TrainConfig {
        seed: full.seed,
        ..TrainConfig::default()
    };
    let narrow = LwganModel::new(&Architecture::default(), 3, 1, full.seed).unwrap();
    let narrow = train_lwgan(narrow, &config, &full.data).unwrap().model;
    let e1 = reconstruction_error(&narrow, &full.data, 1);
    let e5 = reconstruction_error(&full.model, &full.data, full.model.d());
    outcome(e1 >= 3.0 * e5, format!("d = 1 error {e1:.4}, d = 5 error {e5:.4}, ratio {:.2}", e1 / e5))
}

// ---------------------------------------------------------------- properties

fn criterion_4() -> Outcome {
    let mut rng = rng::stream(4, 0);
    let arch = Architecture {
        encoder_hidden: vec![32, 32],
        generator_hidden: vec![32, 32],
        critic_hidden: vec![8],
        ..Architecture::default()
    };
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..100u64 {
        let kind = DatasetKind::ALL[trial as usize % 3];
        let x = kind.generate(64, &mut rng::stream(child_seed(4, trial), streams::DATA)).unwrap().into_rows();
        let model = LwganModel::new(&arch, kind.ambient_dim(), kind.latent_dim(), child_seed(5, trial)).unwrap();
        let s = rng.random_range(1..=model.d());
        let gen = model.generate(&sample_latent(&mut rng, 64, model.mask(s).unwrap())).unwrap();
        let rec = model.reconstruct(&x, s).unwrap();
        let lhs = w1_exact(&x, &gen).unwrap();
        let rhs = w1_exact(&x, &rec).unwrap() + w1_exact(&rec, &gen).unwrap();
        worst = worst.max(lhs - rhs);
    }
    outcome(worst <= 1e-9, format!("100 triples, max(lhs − rhs) = {worst:.3e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = rng::stream(5, 0);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..=6);
        let p = rng.random_range(1..=3);
        let a = random(&mut rng, m, p);
        let b = random(&mut rng, m, p);
        worst = worst.max((w1_exact(&a, &b).unwrap() - w1_brute(&a, &b).unwrap()).abs());
    }
    outcome(worst <= 1e-12, format!("200 instances, max |exact − brute| = {worst:.3e}"))
}

type Op = for<'g> fn(&'g Graph, Var<'g>, &Array2<f64>) -> Var<'g>;

/// Each entry maps the checked input (and a fixed random operand of the
/// same shape where one is needed) to a tensor.
fn registry() -> Vec<(&'static str, Op)> {
    fn other<'g>(g: &'g Graph, c: &Array2<f64>) -> Var<'g> {
        g.constant(c.clone())
    }
    vec![
        ("matmul_lhs", |g, x, c| x.matmul(&other(g, c).transpose()).unwrap()),
        ("matmul_rhs", |g, x, c| other(g, c).matmul(&x.transpose()).unwrap()),
        ("transpose", |_, x, _| x.transpose()),
        ("add_lhs", |g, x, c| x.add(&other(g, c)).unwrap()),
        ("add_rhs", |g, x, c| other(g, c).add(&x).unwrap()),
        ("sub_lhs", |g, x, c| x.sub(&other(g, c)).unwrap()),
        ("sub_rhs", |g, x, c| other(g, c).sub(&x).unwrap()),
        ("mul_lhs", |g, x, c| x.mul(&other(g, c)).unwrap()),
        ("mul_rhs", |g, x, c| other(g, c).mul(&x).unwrap()),
        ("add_bias_input", |g, x, c| x.add_bias(&other(g, c).sum_rows()).unwrap()),
        ("add_bias_bias", |g, x, c| other(g, c).add_bias(&x.sum_rows()).unwrap()),
        ("sum_rows", |_, x, _| x.sum_rows()),
        ("broadcast_rows", |_, x, _| x.sum_rows().broadcast_rows(5).unwrap()),
        ("sum_cols", |_, x, _| x.sum_cols()),
        ("broadcast_cols", |_, x, _| x.sum_cols().broadcast_cols(3).unwrap()),
        ("sum", |_, x, _| x.sum()),
        ("broadcast_scalar", |_, x, _| x.sum().broadcast_scalar(2, 3).unwrap()),
        ("mean", |_, x, _| x.mean()),
        ("scale", |_, x, _| x.scale(-1.7)),
        ("neg", |_, x, _| x.neg()),
        ("add_scalar", |_, x, _| x.add_scalar(0.3)),
        ("concat_lhs", |g, x, c| x.concat(&other(g, c)).unwrap()),
        ("concat_rhs", |g, x, c| other(g, c).concat(&x).unwrap()),
        ("slice_cols", |_, x, _| x.slice_cols(1, 3).unwrap()),
        ("pad_cols", |_, x, _| x.pad_cols(2, 7).unwrap()),
        ("relu", |_, x, _| x.relu()),
        ("leaky_relu", |_, x, _| x.leaky_relu(0.1)),
        ("silu", |_, x, _| x.silu()),
        ("sigmoid", |_, x, _| x.sigmoid()),
        ("tanh", |_, x, _| x.tanh()),
        ("exp", |_, x, _| x.exp()),
        ("square", |_, x, _| x.square()),
        ("norm_rows", |_, x, _| x.norm_rows()),
    ]
}

/// `sum(op(x) ⊙ W)` for a fixed random weight `W`, so every output
/// element contributes.
fn weighted<'g>(g: &'g Graph, op: Op, x: Var<'g>, c: &Array2<f64>, w_seed: u64) -> Var<'g> {
    let y = op(g, x, c);
    let (r, k) = y.dim();
    let w = random(&mut rng::stream(w_seed, 1), r, k);
    y.mul(&g.constant(w)).unwrap().sum()
}

/// Largest violation ratio `|a − fd| / (atol + rtol |fd|)` over all inputs.
fn violation(analytic: &[f64], fd: &[f64], rtol: f64, atol: f64) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / (atol + rtol * f.abs()))
        .fold(0.0, f64::max)
}

fn criterion_6() -> Outcome {
    let (rtol, atol, h) = (1e-4, 1e-8, 1e-5);
    let mut rng = rng::stream(6, 0);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let ops = registry();
    for (name, op) in &ops {
        let mut op_worst = 0.0f64;
        for point in 0..50u64 {
            let x = uniform(&mut rng, 4, 3);
            let c = uniform(&mut rng, 4, 3);
            let w_seed = child_seed(point, 6);
            let analytic = {
                let g = Graph::new();
                let xv = g.leaf(&Tensor::from_array(x.clone()));
                let y = weighted(&g, *op, xv, &c, w_seed);
                g.grad_values(y, &[xv]).unwrap().remove(0).values().to_vec()
            };
            let eval = |v: &Array2<f64>| {
                let g = Graph::new();
                weighted(&g, *op, g.constant(v.clone()), &c, w_seed).item().unwrap()
            };
            let fd: Vec<f64> = (0..x.len())
                .map(|i| {
                    let (mut plus, mut minus) = (x.clone(), x.clone());
                    let (r, k) = (i / 3, i % 3);
                    plus[[r, k]] += h;
                    minus[[r, k]] -= h;
                    (eval(&plus) - eval(&minus)) / (2.0 * h)
                })
                .collect();
            op_worst = op_worst.max(violation(&analytic, &fd, rtol, atol));
        }
        if op_worst > 1.0 {
            failures.push(format!("{name} ({op_worst:.2})"));
        }
        worst = worst.max(op_worst);
    }
    let detail = if failures.is_empty() {
        format!("{} ops × 50 points, worst |a − fd| / (1e-8 + 1e-4 |fd|) = {worst:.3}", ops.len())
    } else {
        format!("failing ops: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn linear_critic(w: &[f64], b: f64) -> Mlp {
    let spec = MlpSpec::new(vec![w.len(), 1], vec![Activation::Identity]).unwrap();
    let params = vec![
        Param {
            name: "critic.w0".into(),
            value: Tensor::from_vec(1, w.len(), w.to_vec()).unwrap(),
        },
        Param {
            name: "critic.b0".into(),
            value: Tensor::from_vec(1, 1, vec![b]).unwrap(),
        },
    ];
    Mlp::from_params(spec, params).unwrap()
}

fn criterion_7() -> Outcome {
    let (rtol, atol, h) = (1e-3, 1e-9, 1e-6);
    let mut rng = rng::stream(7, 0);
    let acts = [Activation::Relu, Activation::LeakyRelu { alpha: 0.1 }, Activation::Silu, Activation::Tanh];
    let mut worst = 0.0f64;
    let mut bias_leak = 0.0f64;
    for (i, act) in acts.iter().cycle().take(8).enumerate() {
        let spec = MlpSpec::uniform(vec![3, 8, 8, 1], *act).unwrap();
        let critic = Mlp::init(spec, "critic", &mut rng::stream(child_seed(7, i as u64), streams::INIT)).unwrap();
        let real = random(&mut rng, 16, 3);
        let gen = random(&mut rng, 16, 3);
        let eps: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let x_hat = lwgan_core::objective::interpolate(&real, &gen, &eps).unwrap();
        let n_params = critic.params.len();
        // Parameters the penalty never reaches (the output bias, and every
        // bias under a piecewise-linear activation) have analytic gradient 0.
        let analytic: Vec<Vec<f64>> = (0..n_params)
            .map(|k| {
                let g = Graph::new();
                let bound = critic.bind(&g);
                let gp = gradient_penalty_var(&critic, &bound, &x_hat, None).unwrap();
                match g.grad_values(gp, &bound[k..=k]) {
                    Ok(mut v) => v.remove(0).values().to_vec(),
                    Err(lwgan_core::Error::Disconnected(_)) => vec![0.0; critic.params[k].value.values().len()],
                    Err(e) => panic!("{e}"),
                }
            })
            .collect();
        for (k, grad) in analytic.iter().enumerate() {
            let value = critic.params[k].value.values().to_vec();
            let fd: Vec<f64> = (0..value.len())
                .map(|j| {
                    let at = |delta: f64| {
                        let mut c = critic.clone();
                        let mut v = value.clone();
                        v[j] += delta;
                        let p = &c.params[k].value;
                        c.params[k].value = Tensor::from_vec(p.rows(), p.cols(), v).unwrap();
                        gradient_penalty(&c, &real, &gen, &eps, None).unwrap()
                    };
                    (at(h) - at(-h)) / (2.0 * h)
                })
                .collect();
            worst = worst.max(violation(grad, &fd, rtol, atol));
        }
        let mut c = critic.clone();
        let b = &c.params[n_params - 1].value;
        c.params[n_params - 1].value = Tensor::from_vec(1, 1, vec![b.values()[0] + 0.5]).unwrap();
        let shifted = gradient_penalty(&c, &real, &gen, &eps, None).unwrap();
        bias_leak = bias_leak.max((shifted - gradient_penalty(&critic, &real, &gen, &eps, None).unwrap()).abs());
    }

    let x = random(&mut rng, 10, 2);
    let y = random(&mut rng, 10, 2);
    let eps: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
    let unit = gradient_penalty(&linear_critic(&[0.6, 0.8], 0.3), &x, &y, &eps, None).unwrap();
    let double = gradient_penalty(&linear_critic(&[1.2, -1.6], -2.0), &x, &y, &eps, None).unwrap();
    let closed = unit.abs() <= 1e-12 && (double - 1.0).abs() <= 1e-12;
    outcome(
        worst <= 1.0 && bias_leak <= 1e-12 && closed,
        format!(
            "8 critics, worst |a − fd| / (1e-9 + 1e-3 |fd|) = {worst:.3}; ‖w‖ = 1 → {unit:.1e}, ‖w‖ = 2 → {double}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = rng::stream(8, 0);
    let mut monotone = true;
    let mut consistent = true;
    for _ in 0..1000 {
        let d = rng.random_range(1..=12);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lambdas: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..0.5)).collect();
        lambdas.sort_by(f64::total_cmp);
        let mut prev = usize::MAX;
        for &l in &lambdas {
            let rho = rank_score(&v, l).unwrap();
            let r = smallest_argmin(&rho).unwrap();
            monotone &= r <= prev;
            prev = r;
            let recon = vec![0.0; d];
            let table = lwgan_core::dimsel::RankScoreTable::from_values(&v, &recon, l).unwrap();
            consistent &= table.is_consistent();
            consistent &= table
                .rows
                .iter()
                .all(|row| row.rho_hat == row.v_hat + l * row.s as f64);
        }
    }
    outcome(
        monotone && consistent,
        format!("1000 vectors × 8 penalties: monotone = {monotone}, ϱ̂ = V̂ + λ·s exact = {consistent}"),
    )
}

fn criterion_9() -> Outcome {
    let data = toy_data(DatasetKind::SCurve, 9);
    let config = TrainConfig {
        iterations: 40,
        seed: 9,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = train_lwgan(toy_model(DatasetKind::SCurve, 9).unwrap(), &config, &data).unwrap();
        let path = dir.path().join(format!("metrics_{k}.csv"));
        out.history.write_csv(&path).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    outcome(
        files[0] == files[1] && !files[0].is_empty(),
        format!("two runs, {} bytes each, identical = {}", files[0].len(), files[0] == files[1]),
    )
}

// ---------------------------------------------------------------- driver

fn selected() -> BTreeSet<u32> {
    match std::env::var("LWGAN_ACCEPTANCE") {
        Ok(list) if !list.trim().is_empty() => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        _ => (1..=10).collect(),
    }
}

fn main() -> ExitCode {
    // libtest-style flags passed by cargo are ignored.
    let wanted = selected();
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted.contains(&id) {
            return;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id}] {name}: {} ({:.0}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    };

    report(4, "triangle property of exact W1", &mut criterion_4);
    report(5, "exact W1 equals brute force", &mut criterion_5);
    report(6, "first-order gradcheck of every op", &mut criterion_6);
    report(7, "gradient-penalty parameter gradient", &mut criterion_7);
    report(8, "rank-score algebra", &mut criterion_8);
    report(9, "byte-identical metrics across runs", &mut criterion_9);

    let needs_pipeline = [1, 2, 3].iter().any(|c| wanted.contains(c));
    let runs: Vec<PipelineRun> = if needs_pipeline {
        let start = Instant::now();
        let seeds: &[u64] = if wanted.contains(&1) { &SEEDS } else { &SEEDS[..1] };
        let mut runs = Vec::new();
        for kind in DatasetKind::ALL {
            let mut hits = [0usize; 2];
            for &seed in seeds {
                // Two matching verdicts already decide a 2-of-3 vote.
                if hits.contains(&2) {
                    println!("    {kind} seed {seed}: not needed, verdict decided");
                    continue;
                }
                let run = pipeline(kind, seed);
                hits[usize::from(run.r_hat == kind.intrinsic_dim())] += 1;
                runs.push(run);
            }
        }
        println!("    pipeline runs finished in {:.0}s", start.elapsed().as_secs_f64());
        runs
    } else {
        Vec::new()
    };
    report(1, "toy intrinsic-dimension recovery", &mut || criterion_1(&runs));
    report(3, "rank-one S-curve reconstruction floor", &mut || criterion_3(&runs));
    report(2, "bootstrap concentration", &mut || criterion_2(&runs));

    if wanted.contains(&10) {
        println!("SKIP [10] image-scale experiments: excluded (need convolutional nets, GPUs and a pretrained classifier)");
    }

    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
