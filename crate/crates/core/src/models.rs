//! Rank-aware encoder, generator and critic networks.
//!
//! The encoder and critic see the data row concatenated with the one-hot
//! rank code `e_s`; the encoder output is then masked by `A_s`. The
//! baselines drop the parts they do not use: WGAN has no encoder and an
//! unconditioned critic, WAE has no critic and an unconditioned encoder.

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::latent::{one_hot, RankMask};
use crate::nn::{Activation, Mlp, MlpSpec};
use crate::rng::{self, streams};

/// Hidden widths and activations of the three networks. Input and output
/// widths follow from `(p, d)`; output layers are linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub encoder_hidden: Vec<usize>,
    pub encoder_activation: Activation,
    pub generator_hidden: Vec<usize>,
    pub generator_activation: Activation,
    pub critic_hidden: Vec<usize>,
    pub critic_activation: Activation,
}

impl Default for Architecture {
    /// The toy-manifold networks.
    fn default() -> Self {
        Self {
            encoder_hidden: vec![512, 256, 128, 64, 32],
            encoder_activation: Activation::Relu,
            generator_hidden: vec![64, 64, 64],
            generator_activation: Activation::Silu,
            critic_hidden: vec![64, 64, 64],
            critic_activation: Activation::Relu,
        }
    }
}

fn spec(input: usize, hidden: &[usize], output: usize, act: Activation) -> Result<MlpSpec> {
    let mut widths = Vec::with_capacity(hidden.len() + 2);
    widths.push(input);
    widths.extend_from_slice(hidden);
    widths.push(output);
    MlpSpec::uniform(widths, act)
}

impl Architecture {
    pub fn encoder_spec(&self, input: usize, d: usize) -> Result<MlpSpec> {
        spec(input, &self.encoder_hidden, d, self.encoder_activation)
    }

    pub fn generator_spec(&self, p: usize, d: usize) -> Result<MlpSpec> {
        spec(d, &self.generator_hidden, p, self.generator_activation)
    }

    pub fn critic_spec(&self, input: usize) -> Result<MlpSpec> {
        spec(input, &self.critic_hidden, 1, self.critic_activation)
    }
}

/// Which objective a model set is trained under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lwgan,
    Wgan,
    Wae,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lwgan => "lwgan",
            Mode::Wgan => "wgan",
            Mode::Wae => "wae",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lwgan" => Ok(Mode::Lwgan),
            "wgan" => Ok(Mode::Wgan),
            "wae" => Ok(Mode::Wae),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected lwgan, wgan or wae)"
            ))),
        }
    }
}

fn check_width(op: &'static str, x: &Array2<f64>, width: usize) -> Result<()> {
    if x.ncols() != width {
        return Err(Error::ShapeMismatch {
            op,
            lhs: x.shape().to_vec(),
            rhs: vec![width],
        });
    }
    Ok(())
}

/// Appends the one-hot code `e_s` to every row.
pub fn condition(x: &Array2<f64>, mask: RankMask) -> Result<Array2<f64>> {
    let code = one_hot(mask.d(), mask.s())?;
    let code = code.broadcast((x.nrows(), mask.d())).unwrap();
    Ok(concatenate(Axis(1), &[x.view(), code]).expect("row counts agree"))
}

/// Graph version of [`condition`].
pub fn condition_var<'g>(x: Var<'g>, mask: RankMask) -> Result<Var<'g>> {
    let code = one_hot(mask.d(), mask.s())?;
    let code = code.broadcast((x.dim().0, mask.d())).unwrap().to_owned();
    x.concat(&x.graph().constant(code))
}

/// The LWGAN triple `(Q, G, f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LwganModel {
    pub encoder: Mlp,
    pub generator: Mlp,
    pub critic: Mlp,
    p: usize,
    d: usize,
}

/// Parameters of an [`LwganModel`] lifted onto one graph.
pub struct BoundLwgan<'g> {
    pub encoder: Vec<Var<'g>>,
    pub generator: Vec<Var<'g>>,
    pub critic: Vec<Var<'g>>,
}

impl LwganModel {
    /// Fresh networks for data width `p` and latent width `d`, initialised
    /// from the `INIT` stream of `seed`.
    pub fn new(arch: &Architecture, p: usize, d: usize, seed: u64) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "p and d must be positive, got p = {p}, d = {d}"
            )));
        }
        let mut rng = rng::stream(seed, streams::INIT);
        let encoder = Mlp::init(arch.encoder_spec(p + d, d)?, "encoder", &mut rng)?;
        let generator = Mlp::init(arch.generator_spec(p, d)?, "generator", &mut rng)?;
        let critic = Mlp::init(arch.critic_spec(p + d)?, "critic", &mut rng)?;
        Ok(Self {
            encoder,
            generator,
            critic,
            p,
            d,
        })
    }

    /// Assembles a model from existing networks, checking the widths.
    pub fn from_parts(encoder: Mlp, generator: Mlp, critic: Mlp) -> Result<Self> {
        let d = generator.spec.input_width();
        let p = generator.spec.output_width();
        let ok = encoder.spec.input_width() == p + d
            && encoder.spec.output_width() == d
            && critic.spec.input_width() == p + d
            && critic.spec.output_width() == 1;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "network widths do not fit p = {p}, d = {d}: encoder {:?}, critic {:?}",
                encoder.spec.widths, critic.spec.widths
            )));
        }
        Ok(Self {
            encoder,
            generator,
            critic,
            p,
            d,
        })
    }

    /// Same network shapes with fresh parameters from the `INIT` stream
    /// of `seed`.
    pub fn reinitialized(&self, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, streams::INIT);
        let encoder = Mlp::init(self.encoder.spec.clone(), "encoder", &mut rng)?;
        let generator = Mlp::init(self.generator.spec.clone(), "generator", &mut rng)?;
        let critic = Mlp::init(self.critic.spec.clone(), "critic", &mut rng)?;
        Self::from_parts(encoder, generator, critic)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mask(&self, s: usize) -> Result<RankMask> {
        RankMask::new(self.d, s)
    }

    /// `A_s Q(x, e_s)` for each row.
    pub fn encode(&self, x: &Array2<f64>, s: usize) -> Result<Array2<f64>> {
        let mask = self.mask(s)?;
        check_width("encode", x, self.p)?;
        let raw = self.encoder.eval(&condition(x, mask)?)?;
        mask.apply(&raw)
    }

    pub fn generate(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        check_width("generate", z, self.d)?;
        self.generator.eval(z)
    }

    /// `G(A_s Q(x, e_s))`.
    pub fn reconstruct(&self, x: &Array2<f64>, s: usize) -> Result<Array2<f64>> {
        self.generate(&self.encode(x, s)?)
    }

    /// `f(x, e_s)` as an `n×1` column.
    pub fn criticize(&self, x: &Array2<f64>, s: usize) -> Result<Array2<f64>> {
        let mask = self.mask(s)?;
        check_width("criticize", x, self.p)?;
        self.critic.eval(&condition(x, mask)?)
    }

    pub fn bind<'g>(&self, graph: &'g Graph) -> BoundLwgan<'g> {
        BoundLwgan {
            encoder: self.encoder.bind(graph),
            generator: self.generator.bind(graph),
            critic: self.critic.bind(graph),
        }
    }

    pub fn encode_var<'g>(&self, b: &BoundLwgan<'g>, x: Var<'g>, s: usize) -> Result<Var<'g>> {
        let mask = self.mask(s)?;
        let raw = self.encoder.forward_bound(&b.encoder, condition_var(x, mask)?)?;
        mask.apply_var(raw)
    }

    pub fn generate_var<'g>(&self, b: &BoundLwgan<'g>, z: Var<'g>) -> Result<Var<'g>> {
        self.generator.forward_bound(&b.generator, z)
    }

    pub fn criticize_var<'g>(&self, b: &BoundLwgan<'g>, x: Var<'g>, s: usize) -> Result<Var<'g>> {
        self.criticize_var_with(&b.critic, x, self.mask(s)?)
    }

    /// Critic pass with only the critic parameters bound.
    pub fn criticize_var_with<'g>(
        &self,
        critic: &[Var<'g>],
        x: Var<'g>,
        mask: RankMask,
    ) -> Result<Var<'g>> {
        self.critic.forward_bound(critic, condition_var(x, mask)?)
    }
}

/// Toy-manifold model for `kind`: `(p, d)` is `(2, 5)`, `(3, 5)` or
/// `(5, 10)`.
pub fn toy_model(kind: DatasetKind, seed: u64) -> Result<LwganModel> {
    LwganModel::new(
        &Architecture::default(),
        kind.ambient_dim(),
        kind.latent_dim(),
        seed,
    )
}

/// Generator and unconditioned critic for the WGAN baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct WganModel {
    pub generator: Mlp,
    pub critic: Mlp,
}

impl WganModel {
    pub fn new(arch: &Architecture, p: usize, d: usize, seed: u64) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument("p and d must be positive".into()));
        }
        let mut rng = rng::stream(seed, streams::INIT);
        Ok(Self {
            generator: Mlp::init(arch.generator_spec(p, d)?, "generator", &mut rng)?,
            critic: Mlp::init(arch.critic_spec(p)?, "critic", &mut rng)?,
        })
    }

    pub fn from_parts(generator: Mlp, critic: Mlp) -> Result<Self> {
        if critic.spec.input_width() != generator.spec.output_width()
            || critic.spec.output_width() != 1
        {
            return Err(Error::InvalidArgument(format!(
                "critic widths {:?} do not fit generator widths {:?}",
                critic.spec.widths, generator.spec.widths
            )));
        }
        Ok(Self { generator, critic })
    }

    pub fn p(&self) -> usize {
        self.generator.spec.output_width()
    }

    pub fn d(&self) -> usize {
        self.generator.spec.input_width()
    }
}

/// Unconditioned encoder and generator for the WAE baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct WaeModel {
    pub encoder: Mlp,
    pub generator: Mlp,
}

impl WaeModel {
    pub fn new(arch: &Architecture, p: usize, d: usize, seed: u64) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument("p and d must be positive".into()));
        }
        let mut rng = rng::stream(seed, streams::INIT);
        Ok(Self {
            encoder: Mlp::init(arch.encoder_spec(p, d)?, "encoder", &mut rng)?,
            generator: Mlp::init(arch.generator_spec(p, d)?, "generator", &mut rng)?,
        })
    }

    pub fn from_parts(encoder: Mlp, generator: Mlp) -> Result<Self> {
        if encoder.spec.input_width() != generator.spec.output_width()
            || encoder.spec.output_width() != generator.spec.input_width()
        {
            return Err(Error::InvalidArgument(format!(
                "encoder widths {:?} do not fit generator widths {:?}",
                encoder.spec.widths, generator.spec.widths
            )));
        }
        Ok(Self { encoder, generator })
    }

    pub fn p(&self) -> usize {
        self.generator.spec.output_width()
    }

    pub fn d(&self) -> usize {
        self.generator.spec.input_width()
    }

    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.generator.eval(&self.encoder.eval(x)?)
    }
}

/// Any of the three trained model sets, as stored in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Lwgan(LwganModel),
    Wgan(WganModel),
    Wae(WaeModel),
}

impl AnyModel {
    pub fn mode(&self) -> Mode {
        match self {
            AnyModel::Lwgan(_) => Mode::Lwgan,
            AnyModel::Wgan(_) => Mode::Wgan,
            AnyModel::Wae(_) => Mode::Wae,
        }
    }

    pub fn p(&self) -> usize {
        self.generator().spec.output_width()
    }

    pub fn d(&self) -> usize {
        self.generator().spec.input_width()
    }

    pub fn generator(&self) -> &Mlp {
        match self {
            AnyModel::Lwgan(m) => &m.generator,
            AnyModel::Wgan(m) => &m.generator,
            AnyModel::Wae(m) => &m.generator,
        }
    }

    pub fn encoder(&self) -> Option<&Mlp> {
        match self {
            AnyModel::Lwgan(m) => Some(&m.encoder),
            AnyModel::Wgan(_) => None,
            AnyModel::Wae(m) => Some(&m.encoder),
        }
    }

    pub fn critic(&self) -> Option<&Mlp> {
        match self {
            AnyModel::Lwgan(m) => Some(&m.critic),
            AnyModel::Wgan(m) => Some(&m.critic),
            AnyModel::Wae(_) => None,
        }
    }

    pub fn as_lwgan(&self) -> Option<&LwganModel> {
        match self {
            AnyModel::Lwgan(m) => Some(m),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use proptest::prelude::*;

    use super::*;
    use crate::autodiff::Tensor;
    use crate::latent::standard_normal;
    use crate::nn::Param;

    fn param(name: &str, rows: usize, cols: usize, v: &[f64]) -> Param {
        Param {
            name: name.into(),
            value: Tensor::from_vec(rows, cols, v.to_vec()).unwrap(),
        }
    }

    fn linear(widths: [usize; 2], w: &[f64], b: &[f64]) -> Mlp {
        let spec = MlpSpec::new(widths.to_vec(), vec![Activation::Identity]).unwrap();
        Mlp::from_params(
            spec,
            vec![
                param("w", widths[1], widths[0], w),
                param("b", 1, widths[1], b),
            ],
        )
        .unwrap()
    }

    /// p = 1, d = 2 with single linear layers.
    fn tiny() -> LwganModel {
        // Q(x, e) = [x + e1 + 2 e2, 2x − e2]
        let encoder = linear([3, 2], &[1.0, 1.0, 2.0, 2.0, 0.0, -1.0], &[0.0, 0.0]);
        // G(z) = z1 − z2 + 0.5
        let generator = linear([2, 1], &[1.0, -1.0], &[0.5]);
        // f(x, e) = 3x + e1 − e2
        let critic = linear([3, 1], &[3.0, 1.0, -1.0], &[0.0]);
        LwganModel::from_parts(encoder, generator, critic).unwrap()
    }

    #[test]
    fn toy_model_dimensions() {
        let m = toy_model(DatasetKind::SwissRoll, 0).unwrap();
        assert_eq!((m.p(), m.d()), (2, 5));
        assert_eq!(m.encoder.spec.widths, vec![7, 512, 256, 128, 64, 32, 5]);
        assert_eq!(m.generator.spec.widths, vec![5, 64, 64, 64, 2]);
        assert_eq!(m.critic.spec.widths, vec![7, 64, 64, 64, 1]);
        assert_eq!(m.encoder.spec.activations[0], Activation::Relu);
        assert_eq!(m.generator.spec.activations[0], Activation::Silu);
        assert_eq!(*m.encoder.spec.activations.last().unwrap(), Activation::Identity);

        let m = toy_model(DatasetKind::SCurve, 0).unwrap();
        assert_eq!((m.p(), m.d()), (3, 5));
        let m = toy_model(DatasetKind::Hyperplane, 0).unwrap();
        assert_eq!((m.p(), m.d()), (5, 10));
        assert_eq!(m.encoder.spec.input_width(), 15);
    }

    #[test]
    fn reinitialized_matches_fresh_construction() {
        let m = toy_model(DatasetKind::SCurve, 3).unwrap();
        assert_eq!(m.reinitialized(3).unwrap(), m);
        let other = m.reinitialized(4).unwrap();
        assert_ne!(other, m);
        assert_eq!(other.encoder.spec, m.encoder.spec);
    }

    #[test]
    fn hand_computed_encode() {
        let m = tiny();
        let x = array![[2.0]];
        // s = 2: e = (0, 1) → (2 + 2, 4 − 1) = (4, 3)
        assert_eq!(m.encode(&x, 2).unwrap(), array![[4.0, 3.0]]);
        // s = 1: e = (1, 0) → (3, 4), masked → (3, 0)
        assert_eq!(m.encode(&x, 1).unwrap(), array![[3.0, 0.0]]);
        assert!(m.encode(&x, 3).is_err());
        assert!(m.encode(&array![[1.0, 2.0]], 1).is_err());
    }

    #[test]
    fn hand_computed_generate_and_criticize() {
        let m = tiny();
        assert_eq!(m.generate(&array![[3.0, 1.0]]).unwrap(), array![[2.5]]);
        // f(1, e1) = 3 + 1, f(1, e2) = 3 − 1
        assert_eq!(m.criticize(&array![[1.0]], 1).unwrap(), array![[4.0]]);
        assert_eq!(m.criticize(&array![[1.0]], 2).unwrap(), array![[2.0]]);
    }

    #[test]
    fn rank_conditioning_is_live() {
        let m = toy_model(DatasetKind::SCurve, 3).unwrap();
        let x = standard_normal(&mut rng::stream(1, 0), 4, 3);
        assert_ne!(m.criticize(&x, 1).unwrap(), m.criticize(&x, 2).unwrap());
    }

    #[test]
    fn zero_networks_output_zero() {
        let mut m = toy_model(DatasetKind::SwissRoll, 1).unwrap();
        for net in [&mut m.generator, &mut m.critic] {
            for p in &mut net.params {
                p.value = Tensor::zeros(p.value.rows(), p.value.cols());
            }
        }
        let z = standard_normal(&mut rng::stream(2, 0), 5, 5);
        assert!(m.generate(&z).unwrap().iter().all(|&v| v == 0.0));
        let x = standard_normal(&mut rng::stream(2, 1), 5, 2);
        assert!(m.criticize(&x, 3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_rank_mask_leaves_generation_unchanged() {
        let m = toy_model(DatasetKind::SCurve, 2).unwrap();
        let z = standard_normal(&mut rng::stream(3, 0), 8, 5);
        let masked = RankMask::full(5).unwrap().apply(&z).unwrap();
        assert_eq!(m.generate(&masked).unwrap(), m.generate(&z).unwrap());
    }

    #[test]
    fn graph_paths_match_eval_paths() {
        let m = toy_model(DatasetKind::SCurve, 4).unwrap();
        let x = standard_normal(&mut rng::stream(4, 0), 6, 3);
        let g = Graph::new();
        let b = m.bind(&g);
        for s in 1..=5 {
            let xv = g.constant(x.clone());
            let z = m.encode_var(&b, xv, s).unwrap();
            let y = m.generate_var(&b, z).unwrap();
            let f = m.criticize_var(&b, xv, s).unwrap();
            let close = |a: &Array2<f64>, b: &Array2<f64>| {
                a.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-12)
            };
            assert!(close(&z.value(), &m.encode(&x, s).unwrap()));
            assert!(close(&y.value(), &m.reconstruct(&x, s).unwrap()));
            assert!(close(&f.value(), &m.criticize(&x, s).unwrap()));
        }
    }

    #[test]
    fn gradients_through_masked_coordinates_are_zero() {
        // Only the first output unit of the encoder's last layer can
        // influence anything when s = 1.
        let m = toy_model(DatasetKind::SwissRoll, 5).unwrap();
        let x = standard_normal(&mut rng::stream(5, 0), 4, 2);
        let g = Graph::new();
        let b = m.bind(&g);
        let z = m.encode_var(&b, g.constant(x), 1).unwrap();
        let out = m.generate_var(&b, z).unwrap().sum();
        let last_w = b.encoder[b.encoder.len() - 2];
        let grad = g.grad_values(out, &[last_w]).unwrap().remove(0);
        let grad = grad.array();
        assert!(grad.row(0).iter().any(|&v| v != 0.0));
        for r in 1..5 {
            assert!(grad.row(r).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        assert_eq!(
            toy_model(DatasetKind::Hyperplane, 9).unwrap(),
            toy_model(DatasetKind::Hyperplane, 9).unwrap()
        );
        assert_ne!(
            toy_model(DatasetKind::Hyperplane, 9).unwrap(),
            toy_model(DatasetKind::Hyperplane, 10).unwrap()
        );
    }

    #[test]
    fn from_parts_rejects_mismatched_widths() {
        let m = tiny();
        let bad_critic = linear([2, 1], &[1.0, 1.0], &[0.0]);
        assert!(LwganModel::from_parts(m.encoder.clone(), m.generator.clone(), bad_critic).is_err());
        assert!(WganModel::from_parts(m.generator.clone(), m.critic.clone()).is_err());
    }

    #[test]
    fn baseline_shapes() {
        let arch = Architecture::default();
        let w = WganModel::new(&arch, 3, 1, 0).unwrap();
        assert_eq!(w.critic.spec.input_width(), 3);
        assert_eq!((w.p(), w.d()), (3, 1));
        let a = WaeModel::new(&arch, 3, 2, 0).unwrap();
        assert_eq!(a.encoder.spec.widths.first(), Some(&3));
        assert_eq!(a.encoder.spec.output_width(), 2);
        let any = AnyModel::Wgan(w);
        assert!(any.encoder().is_none());
        assert_eq!(any.mode(), Mode::Wgan);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn encode_output_satisfies_mask(seed in 0u64..1000, s in 1usize..=5) {
            let arch = Architecture {
                encoder_hidden: vec![8, 8],
                ..Architecture::default()
            };
            let m = LwganModel::new(&arch, 3, 5, seed).unwrap();
            let x = standard_normal(&mut rng::stream(seed, 9), 5, 3);
            let z = m.encode(&x, s).unwrap();
            prop_assert_eq!(&m.mask(s).unwrap().apply(&z).unwrap(), &z);
            prop_assert_eq!(&m.encode(&x, s).unwrap(), &z);
        }
    }
}
