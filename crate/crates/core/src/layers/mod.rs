//! Learned building blocks, each with a forward and a backward pass.

pub mod cbam;
pub mod conv;
pub mod dense;
pub mod lstm;

pub use cbam::{
    cbam_apply, cbam_backward, cbam_channel_attention, cbam_forward_cached,
    cbam_spatial_attention, CbamCache, CbamParams,
};
pub use conv::{
    conv_block_backward, conv_block_forward, conv_block_forward_cached, ConvBlockCache,
    ConvBlockParams,
};
pub use dense::{dense, dense_backward, dropout, dropout_mask};
pub use lstm::{
    lstm_cell, lstm_cell_cached, lstm_sequence, lstm_sequence_backward, lstm_sequence_cached,
    LstmParams, LstmState, SequenceCache, StepCache,
};
