use crate::error::{Error, Result};
use crate::layers::{
    cbam_backward, cbam_forward_cached, conv_block_backward, conv_block_forward_cached, dense,
    dense_backward, dropout_mask, lstm_sequence_backward, lstm_sequence_cached, CbamCache,
    ConvBlockCache, SequenceCache,
};
use crate::numerics::Tensor;

use super::{ModelConfig, ModelParams, Weights};

#[derive(Debug, Clone)]
struct SnapshotCache {
    conv: Vec<ConvBlockCache>,
    cbam: CbamCache,
    compress: ConvBlockCache,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    snaps: Vec<SnapshotCache>,
    seq: SequenceCache,
    steps: usize,
    mask: Option<Vec<f64>>,
    head_in: Tensor,
    output: f64,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.output
    }

    /// Fingerprint of the piecewise-linear region the pass ran in: every
    /// ReLU on/off state and every max-pool winner. Two passes with equal
    /// fingerprints differ only through smooth operations, which is what a
    /// finite-difference check needs to know.
    pub fn region(&self) -> u64 {
        use std::hash::Hasher;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for s in &self.snaps {
            for c in &s.conv {
                c.hash_region(&mut h);
            }
            s.cbam.hash_region(&mut h);
            s.compress.hash_region(&mut h);
        }
        h.finish()
    }

    /// Channel attention per snapshot, `[W, C]`.
    pub fn channel_attention(&self) -> Result<Tensor> {
        let c = self.snaps[0].cbam.channel_attention().len();
        let data = self
            .snaps
            .iter()
            .flat_map(|s| s.cbam.channel_attention().data().to_vec())
            .collect();
        Tensor::from_vec(&[self.snaps.len(), c], data)
    }

    /// Spatial attention per snapshot, `[W, frames, bins]`.
    pub fn spatial_attention(&self) -> Result<Tensor> {
        let s0 = self.snaps[0].cbam.spatial_attention().shape();
        let (h, w) = (s0[1], s0[2]);
        let data = self
            .snaps
            .iter()
            .flat_map(|s| s.cbam.spatial_attention().data().to_vec())
            .collect();
        Tensor::from_vec(&[self.snaps.len(), h, w], data)
    }
}

/// Checks a window against `[W, frames, bins]`.
pub fn check_window(cfg: &ModelConfig, window: &Tensor) -> Result<()> {
    let want = [cfg.sequence_window, cfg.frames, cfg.freq_bins];
    if window.ndim() != 3 || window.shape()[1..] != want[1..] {
        return Err(Error::dim(
            "forward",
            format!(
                "each snapshot must be ({}, {}), got window shape {:?}",
                cfg.frames,
                cfg.freq_bins,
                window.shape()
            ),
        ));
    }
    if window.shape()[0] != cfg.sequence_window {
        return Err(Error::dim(
            "forward",
            format!(
                "window must hold {} snapshots, got {}",
                cfg.sequence_window,
                window.shape()[0]
            ),
        ));
    }
    Ok(())
}

/// Scalar RUL estimate for one window, in fractions of life.
///
/// `seed` drives the dropout mask and is ignored when `training` is false.
pub fn forward(params: &ModelParams, window: &Tensor, training: bool, seed: u64) -> Result<f64> {
    Ok(forward_cached(params, window, training, seed)?.output)
}

pub fn forward_cached(
    params: &ModelParams,
    window: &Tensor,
    training: bool,
    seed: u64,
) -> Result<ForwardCache> {
    let cfg = &params.config;
    check_window(cfg, window)?;
    let w = &params.weights;
    let (frames, bins) = (cfg.frames, cfg.freq_bins);
    let plane = frames * bins;
    let steps = cfg.sequence_window;

    let mut snaps = Vec::with_capacity(steps);
    let mut seq_in = Vec::with_capacity(steps * plane);
    for snap in window.data().chunks_exact(plane) {
        let mut x = Tensor::from_vec(&[1, frames, bins], snap.to_vec())?;
        let mut conv = Vec::with_capacity(w.conv.len());
        for block in &w.conv {
            let (y, c) = conv_block_forward_cached(&x, block)?;
            conv.push(c);
            x = y;
        }
        let (refined, cbam) = cbam_forward_cached(&x, &w.cbam)?;
        let (squeezed, compress) = conv_block_forward_cached(&refined, &w.compress)?;
        seq_in.extend_from_slice(squeezed.data());
        snaps.push(SnapshotCache { conv, cbam, compress });
    }
    let xs = Tensor::from_vec(&[steps, plane], seq_in)?;
    let (hs, seq) = lstm_sequence_cached(&xs, &w.lstm)?;

    let hid = cfg.lstm_hidden;
    let last = &hs.data()[(steps - 1) * hid..];
    let mask = dropout_mask(hid, cfg.dropout, training, seed)?;
    let head_in = match &mask {
        Some(m) => last.iter().zip(m).map(|(h, m)| h * m).collect(),
        None => last.to_vec(),
    };
    let head_in = Tensor::from_vec(&[hid], head_in)?;
    let output = dense(&head_in, &w.head_w, &w.head_b)?.data()[0];
    if !output.is_finite() {
        return Err(Error::NonFinite(format!("network output is {output}")));
    }
    Ok(ForwardCache {
        snaps,
        seq,
        steps,
        mask,
        head_in,
        output,
    })
}

/// Backpropagates `∂L/∂output` through a cached pass, accumulating into
/// `grads`. Returns the gradient with respect to the input window.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    d_output: f64,
    grads: &mut Weights,
) -> Result<Tensor> {
    let cfg = &params.config;
    let w = &params.weights;
    let hid = cfg.lstm_hidden;
    let (frames, bins) = (cfg.frames, cfg.freq_bins);
    let plane = frames * bins;

    let mut d_last = dense_backward(
        &cache.head_in,
        &w.head_w,
        d_output,
        &mut grads.head_w,
        &mut grads.head_b,
    )?
    .into_data();
    if let Some(m) = &cache.mask {
        for (d, m) in d_last.iter_mut().zip(m) {
            *d *= m;
        }
    }
    let mut grad_hs = vec![0.0; cache.steps * hid];
    grad_hs[(cache.steps - 1) * hid..].copy_from_slice(&d_last);
    let grad_hs = Tensor::from_vec(&[cache.steps, hid], grad_hs)?;
    let dxs = lstm_sequence_backward(&grad_hs, &cache.seq, &w.lstm, &mut grads.lstm)?;

    let mut d_window = Vec::with_capacity(cache.steps * plane);
    for (snap, dx) in cache.snaps.iter().zip(dxs.data().chunks_exact(plane)) {
        let d_sq = Tensor::from_vec(&[1, frames, bins], dx.to_vec())?;
        let d_ref = conv_block_backward(&d_sq, &snap.compress, &w.compress, &mut grads.compress)?;
        let mut d = cbam_backward(&d_ref, &snap.cbam, &w.cbam, &mut grads.cbam)?;
        for (i, c) in snap.conv.iter().enumerate().rev() {
            d = conv_block_backward(&d, c, &w.conv[i], &mut grads.conv[i])?;
        }
        d_window.extend_from_slice(d.data());
    }
    Tensor::from_vec(&[cache.steps, frames, bins], d_window)
}

/// Attention maps recorded during an inference pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCapture {
    pub output: f64,
    /// `[W, C]`
    pub channel: Tensor,
    /// `[W, frames, bins]`
    pub spatial: Tensor,
}

pub fn capture_attention(params: &ModelParams, window: &Tensor) -> Result<AttentionCapture> {
    let cache = forward_cached(params, window, false, 0)?;
    Ok(AttentionCapture {
        output: cache.output,
        channel: cache.channel_attention()?,
        spatial: cache.spatial_attention()?,
    })
}
