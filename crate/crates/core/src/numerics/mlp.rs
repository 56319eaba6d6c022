use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{GradientTape, Matrix, Var};
use crate::rng::Rng;

/// Default hidden width of every encoder.
pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `in × out`, applied as `x · weight`.
    pub weight: Matrix,
    /// `1 × out`.
    pub bias: Matrix,
}

/// Stack of affine layers with ReLU between them. When `use_instance_norm`
/// is set, every affine output is instance-normalized before its activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub output_activation: Activation,
    pub use_instance_norm: bool,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(widths: &[usize], output_activation: Activation, use_instance_norm: bool, rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2, "an Mlp needs input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Layer {
                    weight: Matrix::from_vec(fan_in, fan_out, data).expect("sized above"),
                    bias: Matrix::zeros(1, fan_out),
                }
            })
            .collect();
        Mlp {
            layers,
            output_activation,
            use_instance_norm,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn hidden_width(&self) -> usize {
        self.layers[0].weight.cols()
    }

    /// Two parameter blocks (weight, bias) per layer.
    pub fn param_count(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// Records the forward pass on `tape`, registering layer `l`'s weight as
    /// parameter `first_param + 2l` and its bias as `first_param + 2l + 1`.
    pub fn record(&self, tape: &mut GradientTape, x: Var, first_param: usize) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.input_width() {
            return Err(Error::shape(
                "mlp input",
                format!("{} columns", self.input_width()),
                format!("{cols} columns"),
            ));
        }
        let last = self.layers.len() - 1;
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let w = tape.param(first_param + 2 * l, &layer.weight);
            let b = tape.param(first_param + 2 * l + 1, &layer.bias);
            h = tape.matmul(h, w)?;
            h = tape.add_bias(h, b)?;
            if self.use_instance_norm {
                h = tape.instance_norm(h);
            }
            let act = if l == last {
                self.output_activation
            } else {
                Activation::Relu
            };
            h = match act {
                Activation::Relu => tape.relu(h),
                Activation::Identity => h,
                Activation::Sigmoid => tape.sigmoid(h),
            };
        }
        Ok(h)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        let mut tape = GradientTape::new();
        let x = tape.input(batch.clone());
        let y = self.record(&mut tape, x, 0)?;
        Ok(tape.value(y).clone())
    }
}

/// Free-function form of [`Mlp::forward`].
pub fn mlp_forward(net: &Mlp, batch: &Matrix) -> Result<Matrix> {
    net.forward(batch)
}
