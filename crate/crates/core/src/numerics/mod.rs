//! Minimal dense-array engine: tensors, seeded randomness, convolution,
//! pooling, activations and a finite-difference gradient checker.

mod conv;
mod gradcheck;
mod layers;
mod rng;
mod tensor;

pub use conv::{
    add_channel_bias, channel_sums, conv2d_backward, conv2d_forward, conv_transpose2d_backward,
    conv_transpose2d_forward, ConvGeometry,
};
pub use gradcheck::{finite_diff_check, finite_diff_check_at, numerical_gradient};
pub use layers::{
    avg_pool2_backward, avg_pool2_forward, global_avg_pool_backward, global_avg_pool_forward,
    leaky_relu_backward, leaky_relu_forward,
};
pub use rng::Rng;
pub use tensor::{frobenius_inner, Real, Tensor};
pub(crate) use tensor::dot;
