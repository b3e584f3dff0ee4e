//! Minimal differentiable numeric core: dense tensors, a reverse-mode tape,
//! transformer layers, and a finite-difference gradient checker.

pub mod gradcheck;
pub mod layers;
pub mod param;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use gradcheck::{finite_diff_check, finite_diff_compare, FdConfig, FdReport};
pub use layers::{
    average_pool_masked, multi_head_attention, sinusoidal_positions, transformer_encoder_layer,
    Activation, EncoderLayerParams, MhaParams,
};
pub use param::{Grads, ParamId, ParamSet, Parameter};
pub use scalar::Scalar;
pub use tape::{NodeId, Tape};
pub use tensor::{matmul, softmax, Tensor};

/// Errors from the numeric kernel.
#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("non-finite value produced by op `{op}`")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got {numel} elements")]
    LossNotScalar { numel: usize },
    #[error("{op}: every position is masked")]
    AllMasked { op: &'static str },
    #[error("softmax over an empty axis")]
    EmptyAxis { op: &'static str },
}
