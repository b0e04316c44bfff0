//! From-scratch tensor engine and the 3D-convolutional residual regressor.

mod adam;
mod conv;
mod gradcheck;
mod io;
mod layers;
mod loss;
mod network;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv3d_backward, conv3d_forward, Conv3dGrads, ConvGeometry};
pub use gradcheck::{gradient_check, GradCheckReport, GradCheckScope, GRADCHECK_DENOM_FLOOR};
pub use io::{decode_params, encode_params, load_params, save_params};
pub use layers::{
    global_avg_pool, global_avg_pool_backward, relu_backward, relu_forward, BatchNorm3d, BnCache, Linear,
    BN_EPS, BN_MOMENTUM,
};
pub use loss::mse_loss;
pub use network::{
    network_backward, network_forward, BasicBlock, Conv3d, ConvBn, ForwardCache, ForwardOutput, NetworkConfig,
    NetworkParams,
};
pub use tensor::{gemm, Scalar, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch norm in train mode needs more than one value per channel")]
    DegenerateBatch,
    #[error("non-finite values after {0}")]
    NonFinite(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("finite-difference step must be positive and finite")]
    BadEpsilon,
    #[error("bad parameter file: {0}")]
    BadParamFile(String),
    #[error("parameter file config does not match the expected network config")]
    ConfigMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Train mode normalizes with batch statistics; eval mode with running ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}
