//! Dense 64-bit kernels with hand-written backward passes.

mod attention;
mod gradcheck;
mod init;
mod kernels;
mod params;
mod tensor2d;

pub use attention::{
    multi_head_attention, multi_head_attention_backward, scaled_dot_attention, scaled_dot_attention_backward,
    AttentionCache, AttentionGrads, MhaCache, MhaGrads, MhaWeights,
};
pub use gradcheck::{finite_diff_grad_check, finite_diff_grad_check_with_floor, GradCheckReport};
pub use init::{seeded_init, InitScheme};
pub use kernels::{
    conv3, conv3_backward, layer_norm, layer_norm_backward, linear, linear_backward, sigmoid, softmax,
    softmax_rows, softmax_rows_backward, tanh_backward, LayerNormCache,
};
pub use params::ParamSet;
pub use tensor2d::Tensor2D;
