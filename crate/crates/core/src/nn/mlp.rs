use ndarray::{Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { alpha: f64 },
    Silu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply<'g>(self, x: Var<'g>) -> Var<'g> {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.relu(),
            Activation::LeakyRelu { alpha } => x.leaky_relu(alpha),
            Activation::Silu => x.silu(),
            Activation::Sigmoid => x.sigmoid(),
            Activation::Tanh => x.tanh(),
        }
    }

    fn apply_in_place(self, a: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => a.mapv_inplace(|x| x.max(0.0)),
            Activation::LeakyRelu { alpha } => {
                a.mapv_inplace(|x| if x > 0.0 { x } else { alpha * x })
            }
            Activation::Silu => a.mapv_inplace(|x| x * sigmoid(x)),
            Activation::Sigmoid => a.mapv_inplace(sigmoid),
            Activation::Tanh => a.mapv_inplace(f64::tanh),
        }
    }
}

/// Layer widths plus the activation applied after each affine layer.
///
/// `widths[0]` is the input width and `widths.last()` the output width, so
/// there is one activation per layer; `Identity` gives a linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self {
            widths,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same hidden activation everywhere, linear output layer.
    pub fn uniform(widths: Vec<usize>, hidden: Activation) -> Result<Self> {
        let layers = widths.len().saturating_sub(1);
        let mut activations = vec![hidden; layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(widths, activations)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least an input and an output width".into(),
            ));
        }
        if self.widths.len() != self.activations.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} widths need {} activations, got {}",
                self.widths.len(),
                self.widths.len() - 1,
                self.activations.len()
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument("MLP widths must be positive".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.activations.len()
    }
}

/// A named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Fully connected network. Parameters are stored as
/// `[w0, b0, w1, b1, …]` with weights `out×in` and biases `1×out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<Param>,
}

impl Mlp {
    /// Fan-in scaled uniform init: `W ~ U(−√(6/fan_in), √(6/fan_in))`,
    /// zero biases.
    pub fn init(spec: MlpSpec, prefix: &str, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::with_capacity(2 * spec.layers());
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-bound..=bound)
            });
            params.push(Param {
                name: format!("{prefix}.{i}.weight"),
                value: Tensor::from_array(weight),
            });
            params.push(Param {
                name: format!("{prefix}.{i}.bias"),
                value: Tensor::zeros(1, fan_out),
            });
        }
        Ok(Self { spec, params })
    }

    /// Builds a network from explicit parameters, checking their shapes.
    pub fn from_params(spec: MlpSpec, params: Vec<Param>) -> Result<Self> {
        spec.validate()?;
        if params.len() != 2 * spec.layers() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameter tensors, got {}",
                2 * spec.layers(),
                params.len()
            )));
        }
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let w = params[2 * i].value.shape();
            let b = params[2 * i + 1].value.shape();
            if w != [pair[1], pair[0]] || b != [1, pair[1]] {
                return Err(Error::ShapeMismatch {
                    op: "mlp layer",
                    lhs: w.to_vec(),
                    rhs: b.to_vec(),
                });
            }
        }
        Ok(Self { spec, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    /// Lifts the parameters onto `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph) -> Vec<Var<'g>> {
        self.params.iter().map(|p| graph.leaf(&p.value)).collect()
    }

    /// Forward pass with parameters already bound to the input's graph.
    pub fn forward_bound<'g>(&self, bound: &[Var<'g>], input: Var<'g>) -> Result<Var<'g>> {
        let (_, width) = input.dim();
        if width != self.spec.input_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp_forward",
                lhs: input.shape(),
                rhs: vec![self.spec.input_width()],
            });
        }
        let mut h = input;
        for (layer, act) in self.spec.activations.iter().enumerate() {
            let w = bound[2 * layer];
            let b = bound[2 * layer + 1];
            h = act.apply(h.matmul(&w.transpose())?.add_bias(&b)?);
        }
        Ok(h)
    }

    pub fn forward<'g>(&self, graph: &'g Graph, input: Var<'g>) -> Result<Var<'g>> {
        let bound = self.bind(graph);
        self.forward_bound(&bound, input)
    }

    /// Detached forward pass without recording a graph.
    pub fn eval(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.spec.input_width() {
            return Err(Error::ShapeMismatch {
                op: "mlp_forward",
                lhs: input.shape().to_vec(),
                rhs: vec![self.spec.input_width()],
            });
        }
        let mut h: Option<Array2<f64>> = None;
        for (layer, act) in self.spec.activations.iter().enumerate() {
            let w = self.params[2 * layer].value.array();
            let b = self.params[2 * layer + 1].value.array();
            let x = h.as_ref().unwrap_or(input);
            let mut next = x.dot(&w.t());
            next += &b.index_axis(Axis(0), 0);
            act.apply_in_place(&mut next);
            h = Some(next);
        }
        Ok(h.expect("validated specs have at least one layer"))
    }
}
