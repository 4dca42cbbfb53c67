//! Dense tensors, the forward/backward kernels the network needs, and the
//! finite-difference gradient oracle.

pub mod gradcheck;
pub mod ops;
mod tensor;

pub use gradcheck::{check_probe, grad_check, GradCheckConfig, GradCheckReport, Probe};
pub use ops::{
    activate, activate_backward, conv2d, conv2d_backward, matmul, matmul_backward, pool_channel,
    pool_channel_backward, pool_spatial, pool_spatial_backward, sigmoid, tanh, Activation,
    PoolMode,
};
pub use tensor::{GradPair, Tensor};
