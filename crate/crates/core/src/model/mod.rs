//! The full network: conv blocks, CBAM, a compression conv, stacked LSTM
//! over a window of snapshots, and a dense regression head.

pub mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::{ensure_config, from_bytes, load, save, to_bytes};
pub use config::ModelConfig;
pub use network::{
    backward, capture_attention, check_window, forward, forward_cached, AttentionCapture,
    ForwardCache,
};
pub use params::{build, param_count, tensor_layout, ModelParams, Weights};
