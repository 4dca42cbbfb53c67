//! Remaining-useful-life estimation for rolling bearings from vibration
//! spectrograms.
//!
//! The pipeline turns each 2560-sample vibration recording into an 11×129
//! Hamming-windowed STFT magnitude map, crops it to 11×128, and feeds windows
//! of consecutive maps through a small convolutional stack with a
//! convolutional block attention module (CBAM), a compression convolution,
//! a stacked LSTM over the window, and a dense head that emits the predicted
//! remaining life in percent.
//!
//! Every learned layer has an explicit backward pass; [`numerics::gradcheck`]
//! verifies them against central finite differences.

pub mod config;
pub mod data;
pub mod dsp;
pub mod error;
pub mod io;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{CheckpointError, Error, Result};
pub use numerics::Tensor;
