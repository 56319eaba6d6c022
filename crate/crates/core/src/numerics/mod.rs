//! Dense matrices, encoders, reverse-mode gradients and the optimizer.

mod adam;
mod matrix;
mod mlp;
mod tape;

pub use adam::{adam_step, AdamState, DEFAULT_LR};
pub use matrix::Matrix;
pub use mlp::{mlp_forward, Activation, Layer, Mlp, DEFAULT_HIDDEN};
pub use tape::{instance_norm, sigmoid, GradientTape, Gradients, Var, INSTANCE_NORM_EPS};
