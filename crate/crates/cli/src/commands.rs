use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lwgan_core::datasets::{load_csv, save_csv};
use lwgan_core::dimsel::{bootstrap_dimension, estimate_rank, select_lambda, RankScoreTable};
use lwgan_core::latent::sample_latent;
use lwgan_core::models::{WaeModel, WganModel};
use lwgan_core::rng::{self, streams};
use lwgan_core::trainer::{load_checkpoint, save_checkpoint, train_lwgan, train_wae, train_wgan, TrainHistory};
use lwgan_core::{AnyModel, LwganModel, Mode, RankMask};
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::svg::{self, Panel, Series, Style};
use crate::{BootstrapArgs, GenDataArgs, LambdaArg, PlotArgs, PlotKind, RankScoresArgs, TrainArgs, UsageError};

pub const RUN_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_FILE: &str = "rank_scores.csv";
pub const SUMMARY_FILE: &str = "rank_summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            bail!("data has {} columns but the run was standardised over {}", x.ncols(), self.mean.len());
        }
        Ok((x - &Array1::from(self.mean.clone())) / &Array1::from(self.std.clone()))
    }
}

/// Everything needed to repeat a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub data: PathBuf,
    pub mode: Mode,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub standardization: Option<Standardization>,
    /// Fully resolved configuration.
    pub config: RunConfig,
    pub iterations_run: usize,
    pub converged_at: Option<usize>,
}

impl RunMeta {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The run.json written next to `checkpoint`, if there is one.
    fn beside(checkpoint: &Path) -> Result<Option<Self>> {
        let path = sibling(checkpoint, RUN_FILE);
        if path.exists() {
            Self::load(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn transform(&self, x: Array2<f64>) -> Result<Array2<f64>> {
        match &self.standardization {
            Some(st) => st.apply(&x),
            None => Ok(x),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSummary {
    pub lambda: f64,
    pub lambda_source: String,
    pub r_hat: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub se: Option<f64>,
    pub r_tilde: Option<usize>,
}

#[derive(Serialize)]
struct BootstrapFile {
    rounds: usize,
    r_hat: usize,
    lambda: f64,
    seed: u64,
    n_boot: usize,
    warm_start: bool,
    frequencies: BTreeMap<usize, usize>,
    mode: Option<usize>,
    mode_share: Option<f64>,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_lwgan(path: &Path) -> Result<LwganModel> {
    let model = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    match model {
        AnyModel::Lwgan(m) => Ok(m),
        other => Err(UsageError(format!(
            "{} holds a {} model; rank scoring needs an lwgan checkpoint",
            path.display(),
            other.mode()
        ))
        .into()),
    }
}

fn load_rows(path: &Path) -> Result<Array2<f64>> {
    Ok(load_csv(path)
        .with_context(|| format!("loading {}", path.display()))?
        .into_rows())
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let data = args.dataset.generate(args.n, &mut rng::stream(args.seed, streams::DATA))?;
    save_csv(&data, &args.out)?;
    println!("{} rows, {} columns -> {}", data.n(), data.p(), args.out.display());
    Ok(())
}

/// Flags over file (or replayed run) over defaults.
fn resolve_train(args: &TrainArgs) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, data) = match &args.replay {
        Some(path) => {
            let meta = RunMeta::load(path)?;
            (meta.config, Some(meta.data))
        }
        None => (RunConfig::load_or_default(args.config.as_deref())?, None),
    };
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(mode) = args.mode {
        cfg.train.mode = mode;
    }
    if let Some(t) = args.iterations {
        cfg.train.iterations = t;
    }
    if let Some(d) = args.latent_dim {
        cfg.model.latent_dim = Some(d);
    }
    cfg.standardize |= args.standardize;
    let data = args.data.clone().or(data).expect("clap requires --data without --replay");
    Ok((cfg, data))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let (mut cfg, data_path) = resolve_train(args)?;
    let seed = cfg
        .seed
        .ok_or_else(|| UsageError("train needs a seed: pass --seed or set `seed` in the config".into()))?;
    cfg.train.seed = seed;
    cfg.train.validate().map_err(|e| UsageError(format!("config: {e}")))?;

    let data_path = fs::canonicalize(&data_path).with_context(|| format!("opening {}", data_path.display()))?;
    let dataset = load_csv(&data_path).with_context(|| format!("loading {}", data_path.display()))?;
    let (rows, standardization) = if cfg.standardize {
        let (z, mean, std) = dataset.standardized();
        (z.into_rows(), Some(Standardization { mean: mean.to_vec(), std: std.to_vec() }))
    } else {
        (dataset.into_rows(), None)
    };
    let (n, p) = rows.dim();
    let d = *cfg.model.latent_dim.get_or_insert(p);
    let arch = &cfg.model.architecture;
    let mode = cfg.train.mode;

    let (model, history, converged_at) = match mode {
        Mode::Lwgan => {
            let out = train_lwgan(LwganModel::new(arch, p, d, seed)?, &cfg.train, &rows)?;
            (AnyModel::Lwgan(out.model), out.history, out.converged_at)
        }
        Mode::Wgan => {
            let out = train_wgan(WganModel::new(arch, p, d, seed)?, &cfg.train, &rows)?;
            (AnyModel::Wgan(out.model), out.history, out.converged_at)
        }
        Mode::Wae => {
            let out = train_wae(WaeModel::new(arch, p, d, seed)?, &cfg.train, &rows)?;
            (AnyModel::Wae(out.model), out.history, out.converged_at)
        }
    };

    create_dir(&args.out_dir)?;
    save_checkpoint(&model, args.out_dir.join(CHECKPOINT_FILE))?;
    history.write_csv(args.out_dir.join(METRICS_FILE))?;
    let meta = RunMeta {
        command: "train".into(),
        data: data_path,
        mode,
        seed,
        n,
        p,
        d,
        standardization,
        config: cfg,
        iterations_run: history.len(),
        converged_at,
    };
    write_json(&args.out_dir.join(RUN_FILE), &meta)?;
    println!(
        "{mode}: {} iterations{} -> {}",
        history.len(),
        converged_at.map_or(String::new(), |t| format!(" (plateau at {t})")),
        args.out_dir.display()
    );
    Ok(())
}

fn scores_panel(table: &RankScoreTable) -> Panel {
    let pts = |f: fn(&lwgan_core::dimsel::RankScoreRow) -> f64| -> Vec<(f64, f64)> {
        table.rows.iter().map(|r| (r.s as f64, f(r))).collect()
    };
    let best = &table.rows[table.r_hat - 1];
    Panel {
        title: format!("rank scores (lambda = {:.3e})", table.lambda),
        x_label: "rank s".into(),
        y_label: "score".into(),
        series: vec![
            Series::new("rho_hat", pts(|r| r.rho_hat), Style::Line),
            Series::new("V_hat", pts(|r| r.v_hat), Style::Line),
            Series::new("recon", pts(|r| r.recon), Style::Line),
        ],
        mark: Some((best.s as f64, best.rho_hat, format!("r_hat = {}", table.r_hat))),
    }
}

pub fn rank_scores(args: &RankScoresArgs) -> Result<()> {
    let model = load_lwgan(&args.checkpoint)?;
    let meta = RunMeta::beside(&args.checkpoint)?;
    let mut data = load_rows(&args.data)?;
    if let Some(meta) = &meta {
        data = meta.transform(data)?;
    }
    let cfg = match (&args.config, &meta) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(meta)) => meta.config.clone(),
        (None, None) => RunConfig::default(),
    };
    create_dir(&args.out)?;

    let (lambda, source, se, r_tilde) = match args.lambda {
        LambdaArg::Fixed(v) => (v, "fixed", None, None),
        LambdaArg::Auto => {
            let sel = select_lambda(&model, &data, &cfg.lambda, &cfg.train, args.seed)?;
            let mut csv = String::from("k");
            for s in 1..=model.d() {
                csv.push_str(&format!(",s{s}"));
            }
            csv.push('\n');
            for (k, row) in sel.v_matrix.iter().enumerate() {
                csv.push_str(&(k + 1).to_string());
                for v in row {
                    csv.push_str(&format!(",{v:?}"));
                }
                csv.push('\n');
            }
            write(&args.out.join("lambda_subsets.csv"), &csv)?;
            (sel.lambda, "auto", Some(sel.se), Some(sel.r_tilde))
        }
    };

    let table = estimate_rank(&model, &data, lambda, args.seed)?;
    write(&args.out.join(SCORES_FILE), &table.to_csv())?;
    let summary = RankSummary {
        lambda,
        lambda_source: source.into(),
        r_hat: table.r_hat,
        seed: args.seed,
        n: data.nrows(),
        d: model.d(),
        se,
        r_tilde,
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    write(&args.out.join("rank_scores.svg"), &svg::render(&[scores_panel(&table)]))?;
    println!("r_hat = {} (lambda = {lambda:e})", table.r_hat);
    Ok(())
}

pub fn bootstrap(args: &BootstrapArgs) -> Result<()> {
    let model = load_lwgan(&args.checkpoint)?;
    let meta = RunMeta::beside(&args.checkpoint)?;
    let summary_path = args.summary.clone().unwrap_or_else(|| sibling(&args.checkpoint, SUMMARY_FILE));
    let summary = if summary_path.exists() {
        let text = fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
        Some(serde_json::from_str::<RankSummary>(&text).with_context(|| format!("parsing {}", summary_path.display()))?)
    } else if args.summary.is_some() {
        bail!(UsageError(format!("summary file {} does not exist", summary_path.display())));
    } else {
        None
    };
    let need = |what: &str| UsageError(format!("no {what}: pass --{what} or a rank summary (--summary)", what = what));
    let r_hat = args.r_hat.or(summary.as_ref().map(|s| s.r_hat)).ok_or_else(|| need("r-hat"))?;
    let lambda = args.lambda.or(summary.as_ref().map(|s| s.lambda)).ok_or_else(|| need("lambda"))?;
    if r_hat == 0 || r_hat > model.d() {
        bail!(UsageError(format!("r-hat must lie in 1..={}, got {r_hat}", model.d())));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        bail!(UsageError(format!("lambda must be a non-negative number, got {lambda}")));
    }

    let cfg = match (&args.config, &meta) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(meta)) => meta.config.clone(),
        (None, None) => RunConfig::default(),
    };
    let mut boot = cfg.bootstrap.clone();
    if let Some(r) = args.rounds {
        boot.rounds = r;
    }
    if let Some(t) = args.iterations {
        boot.iterations = t;
    }
    if let Some(b) = args.n_boot {
        boot.n_boot = Some(b);
    }
    boot.warm_start &= !args.cold;
    let n_default = summary.as_ref().map(|s| s.n).or(meta.as_ref().map(|m| m.n));
    let n_boot = match (boot.n_boot, n_default) {
        (Some(b), _) | (None, Some(b)) => b,
        (None, None) => bail!(UsageError("no bootstrap sample size: pass --n-boot or a rank summary".into())),
    };
    boot.n_boot = Some(n_boot);

    let out = bootstrap_dimension(&model, r_hat, lambda, n_boot, &boot, &cfg.train, args.seed)?;
    create_dir(&args.out)?;
    write(&args.out.join("bootstrap.csv"), &out.to_csv())?;
    let mode = out.mode();
    write_json(
        &args.out.join("bootstrap_freq.json"),
        &BootstrapFile {
            rounds: out.rounds,
            r_hat,
            lambda,
            seed: args.seed,
            n_boot,
            warm_start: boot.warm_start,
            frequencies: out.frequencies.clone(),
            mode: mode.map(|m| m.0),
            mode_share: mode.map(|m| m.1),
        },
    )?;
    match mode {
        Some((r, share)) => println!("{} rounds: mode {r} ({:.0}%)", out.rounds, 100.0 * share),
        None => println!("0 rounds"),
    }
    Ok(())
}

fn read_scores(path: &Path) -> Result<RankScoreTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("s,V_hat,rho_hat,recon") {
        bail!("{}: unexpected header", path.display());
    }
    let (mut v, mut recon, mut rho) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        if f.len() != 4 || f[0] as usize != v.len() + 1 {
            bail!("{}: line {} is malformed", path.display(), i + 2);
        }
        v.push(f[1]);
        rho.push(f[2]);
        recon.push(f[3]);
    }
    if v.is_empty() {
        bail!("{}: no ranks", path.display());
    }
    // The penalty weight is implied by the first row.
    let lambda = rho[0] - v[0];
    let mut table = RankScoreTable::from_values(&v, &recon, lambda)?;
    for (row, r) in table.rows.iter_mut().zip(&rho) {
        row.rho_hat = *r;
    }
    table.r_hat = lwgan_core::objective::smallest_argmin(&rho).expect("non-empty");
    Ok(table)
}

fn losses_panel(history: &TrainHistory) -> Panel {
    type Field = fn(&lwgan_core::trainer::IterRecord) -> f64;
    let columns: [(&str, Field); 4] = [
        ("critic_gap_pre", |r| r.critic_gap_pre),
        ("critic_gap_post", |r| r.critic_gap_post),
        ("recon", |r| r.recon),
        ("gp", |r| r.gp),
    ];
    Panel {
        title: "training losses".into(),
        x_label: "iteration".into(),
        y_label: "value".into(),
        series: columns
            .iter()
            .map(|(name, f)| {
                Series::new(*name, history.records.iter().map(|r| (r.iter as f64, f(r))).collect(), Style::Line)
            })
            .collect(),
        mark: None,
    }
}

fn scatter_panels(sets: &[(&str, Array2<f64>)]) -> Vec<Panel> {
    let p = sets[0].1.ncols();
    let pairs: Vec<(usize, usize)> = match p {
        1 => vec![(0, 0)],
        2 => vec![(0, 1)],
        _ => vec![(0, 1), (0, 2)],
    };
    pairs
        .into_iter()
        .map(|(a, b)| {
            let series = sets
                .iter()
                .map(|(name, x)| {
                    let pts = x
                        .rows()
                        .into_iter()
                        .map(|r| (r[a], if p == 1 { 0.0 } else { r[b] }))
                        .collect();
                    Series::new(*name, pts, Style::Markers)
                })
                .collect();
            Panel {
                title: if p == 1 { "x1".into() } else { format!("x{} vs x{}", b + 1, a + 1) },
                x_label: format!("x{}", a + 1),
                y_label: if p == 1 { String::new() } else { format!("x{}", b + 1) },
                series,
                mark: None,
            }
        })
        .collect()
}

fn scatter(args: &PlotArgs) -> Result<String> {
    let checkpoint = args.run_dir.join(CHECKPOINT_FILE);
    let model = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let meta = RunMeta::load(&args.run_dir.join(RUN_FILE))?;
    let data = meta.transform(load_rows(&meta.data)?)?;
    let m = data.nrows().min(args.points.max(1));
    let real = data.slice(s![..m, ..]).to_owned();
    let d = model.d();
    let summary_rank = {
        let path = args.run_dir.join(SUMMARY_FILE);
        if path.exists() {
            serde_json::from_str::<RankSummary>(&fs::read_to_string(&path)?).ok().map(|s| s.r_hat)
        } else {
            None
        }
    };
    let s = args.rank.or(summary_rank).unwrap_or(d);
    let mask = RankMask::new(d, s).map_err(|e| UsageError(format!("--rank: {e}")))?;
    let mut rng = rng::stream(meta.seed, streams::EVAL);
    let z = match model.mode() {
        Mode::Lwgan => sample_latent(&mut rng, m, mask),
        _ => sample_latent(&mut rng, m, RankMask::full(d)?),
    };
    let mut sets = vec![("real", real.clone()), ("generated", model.generator().eval(&z)?)];
    match &model {
        AnyModel::Lwgan(lw) => sets.push(("reconstructed", lw.reconstruct(&real, s)?)),
        AnyModel::Wae(wae) => sets.push(("reconstructed", wae.reconstruct(&real)?)),
        AnyModel::Wgan(_) => {}
    }
    let mut panels = scatter_panels(&sets);
    if let Some(first) = panels.first_mut() {
        first.title = format!("{} at rank {s}: {}", model.mode(), first.title);
    }
    Ok(svg::render(&panels))
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let svg = match args.kind {
        PlotKind::Losses => {
            let history = TrainHistory::read_csv(args.run_dir.join(METRICS_FILE))?;
            svg::render(&[losses_panel(&history)])
        }
        PlotKind::Scores => svg::render(&[scores_panel(&read_scores(&args.run_dir.join(SCORES_FILE))?)]),
        PlotKind::Scatter => scatter(args)?,
    };
    let name = match args.kind {
        PlotKind::Scatter => "scatter.svg",
        PlotKind::Scores => "scores.svg",
        PlotKind::Losses => "losses.svg",
    };
    let out = args.out.clone().unwrap_or_else(|| args.run_dir.join(name));
    write(&out, &svg)?;
    println!("{}", out.display());
    Ok(())
}
