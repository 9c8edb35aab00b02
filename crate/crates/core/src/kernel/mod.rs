//! Small reverse-mode building blocks: each op exposes a forward pass and a
//! hand-written backward pass.

pub mod attention;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;

pub use attention::{AttentionCache, AttentionOut, CrossAttention};
pub use gradcheck::{grad_check, rel_err, GradCheckOptions, GradCheckReport};
pub use ops::{
    cross_entropy_rows, layer_norm, layer_norm_backward, sigmoid, sigmoid_backward, sigmoid_mat,
    softmax_rows, softmax_rows_backward, tanh_backward, tanh_mat, Affine, Ffn, FfnCache,
    LayerNormCache,
};
pub use optim::{clip_grad_norm, sgd_step, AdamLike};
pub use params::{Checkpoint, Mat, ParamId, ParamStore, TensorRecord};
