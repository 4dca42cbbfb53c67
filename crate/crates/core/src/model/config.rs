use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on learned scalars accepted by validation.
pub const MAX_PARAMS: usize = 1 << 31;

/// Architecture knobs. Defaults reproduce the reference network: two 3×3
/// conv blocks (1→5, 5→5), CBAM with an MLP hidden width of 2 and a 3×3
/// spatial kernel, a 5→1 compression conv, two LSTM layers of width 1408 over
/// windows of five snapshots, and a dense head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Spectrogram frames per snapshot (rows of the input map).
    pub frames: usize,
    /// Frequency bins per snapshot (columns of the input map).
    pub freq_bins: usize,
    pub conv_channels: usize,
    /// Conv blocks before the attention module; the first maps 1→C, the
    /// rest C→C.
    pub conv_depth: usize,
    pub conv_kernel: usize,
    pub cbam_reduction: usize,
    pub cbam_spatial_kernel: usize,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    /// Width of the dense head's input. Derived from `lstm_hidden` when
    /// unset; when set it must match.
    pub head_input: Option<usize>,
    /// Snapshots per sample (LSTM sequence length).
    pub sequence_window: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frames: 11,
            freq_bins: 128,
            conv_channels: 5,
            conv_depth: 2,
            conv_kernel: 3,
            cbam_reduction: 2,
            cbam_spatial_kernel: 3,
            lstm_layers: 2,
            lstm_hidden: 1408,
            head_input: None,
            sequence_window: 5,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frames", self.frames),
            ("freq_bins", self.freq_bins),
            ("conv_channels", self.conv_channels),
            ("conv_depth", self.conv_depth),
            ("conv_kernel", self.conv_kernel),
            ("cbam_reduction", self.cbam_reduction),
            ("cbam_spatial_kernel", self.cbam_spatial_kernel),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("sequence_window", self.sequence_window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        for (name, k) in [
            ("conv_kernel", self.conv_kernel),
            ("cbam_spatial_kernel", self.cbam_spatial_kernel),
        ] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("model.{name} must be odd, got {k}")));
            }
        }
        if let Some(h) = self.head_input {
            if h != self.lstm_hidden {
                return Err(Error::Config(format!(
                    "dense head input {h} does not match LSTM hidden size {}",
                    self.lstm_hidden
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "model.dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        match self.scalar_count() {
            Some(n) if n <= MAX_PARAMS => Ok(()),
            _ => Err(Error::Config(format!(
                "model has more than {MAX_PARAMS} parameters"
            ))),
        }
    }

    /// Closed-form parameter count with overflow checks, so that absurd
    /// configurations are rejected without building their layout.
    pub(crate) fn scalar_count(&self) -> Option<usize> {
        let (c, k, h) = (self.conv_channels, self.conv_kernel, self.lstm_hidden);
        let kk = k.checked_mul(k)?;
        let first = c.checked_mul(kk)?.checked_add(c)?;
        let block = c.checked_mul(c)?.checked_mul(kk)?.checked_add(c)?;
        let conv = block.checked_mul(self.conv_depth - 1)?.checked_add(first)?;
        let hid = self.cbam_hidden();
        let ks = self.cbam_spatial_kernel.checked_mul(self.cbam_spatial_kernel)?;
        let cbam = hid
            .checked_mul(c)?
            .checked_mul(2)?
            .checked_add(hid + c)?
            .checked_add(ks.checked_mul(2)?)?;
        let compress = c.checked_mul(kk)?.checked_add(1)?;
        let gates = |width: usize| -> Option<usize> {
            h.checked_add(width)?.checked_mul(h)?.checked_add(h)?.checked_mul(4)
        };
        let input = self.frames.checked_mul(self.freq_bins)?;
        let lstm = gates(h)?
            .checked_mul(self.lstm_layers - 1)?
            .checked_add(gates(input)?)?;
        [conv, cbam, compress, lstm, h, 1]
            .into_iter()
            .try_fold(0usize, |acc, v| acc.checked_add(v))
    }

    /// Flattened per-snapshot feature length fed to the first LSTM layer.
    pub fn lstm_input(&self) -> usize {
        self.frames * self.freq_bins
    }

    /// Hidden width of the channel-attention MLP, `max(C / r, 1)`.
    pub fn cbam_hidden(&self) -> usize {
        (self.conv_channels / self.cbam_reduction).max(1)
    }

    pub fn snapshot_shape(&self) -> [usize; 2] {
        [self.frames, self.freq_bins]
    }
}
