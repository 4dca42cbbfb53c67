//! Binary checkpoint, all little-endian:
//!
//! ```text
//! "SALC"  u32 version
//! config: u32 × 12 (frames, freq_bins, conv_channels, conv_depth, conv_kernel,
//!         cbam_reduction, cbam_spatial_kernel, lstm_layers, lstm_hidden,
//!         head_input or 0, sequence_window, reserved 0), f64 dropout
//! stats:  u8 present, f64 min, f64 max
//! u32 tensor count, then per tensor: u32 rank, u32 dims…, f64 values…
//! ```

use std::path::Path;

use crate::dsp::NormStats;
use crate::error::{CheckpointError, Error, Result};
use crate::io::{read_file, write_file};

use super::{tensor_layout, ModelConfig, ModelParams, Weights};

pub const MAGIC: &[u8; 4] = b"SALC";
pub const VERSION: u32 = 1;

/// Dimensions larger than this are treated as corruption rather than
/// attempted allocations.
const MAX_ELEMENTS: usize = 1 << 28;

pub fn to_bytes(params: &ModelParams) -> Result<Vec<u8>> {
    params.validate()?;
    let c = &params.config;
    let mut out = Vec::with_capacity(64 + params.weights.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let fields = [
        c.frames,
        c.freq_bins,
        c.conv_channels,
        c.conv_depth,
        c.conv_kernel,
        c.cbam_reduction,
        c.cbam_spatial_kernel,
        c.lstm_layers,
        c.lstm_hidden,
        c.head_input.unwrap_or(0),
        c.sequence_window,
        0,
    ];
    for v in fields {
        let v = u32::try_from(v).map_err(|_| Error::Config(format!("config value {v} exceeds u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.dropout.to_le_bytes());
    let (present, min, max) = match params.norm_stats {
        Some(s) => (1u8, s.min, s.max),
        None => (0u8, 0.0, 0.0),
    };
    out.push(present);
    out.extend_from_slice(&min.to_le_bytes());
    out.extend_from_slice(&max.to_le_bytes());
    let tensors = params.weights.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let mut f = [0usize; 12];
    for v in &mut f {
        *v = r.u32("config")? as usize;
    }
    let dropout = r.f64("config")?;
    let config = ModelConfig {
        frames: f[0],
        freq_bins: f[1],
        conv_channels: f[2],
        conv_depth: f[3],
        conv_kernel: f[4],
        cbam_reduction: f[5],
        cbam_spatial_kernel: f[6],
        lstm_layers: f[7],
        lstm_hidden: f[8],
        head_input: (f[9] != 0).then_some(f[9]),
        sequence_window: f[10],
        dropout,
    };
    config
        .validate()
        .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let present = r.take(1, "norm stats")?[0];
    let (min, max) = (r.f64("norm stats")?, r.f64("norm stats")?);
    let norm_stats = match present {
        0 => None,
        1 => Some(NormStats::new(min, max).map_err(|e| CheckpointError::Invalid(e.to_string()))?),
        b => return Err(CheckpointError::Invalid(format!("norm stats flag {b}"))),
    };

    let layout = tensor_layout(&config);
    let total: usize = layout.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if total > MAX_ELEMENTS {
        return Err(CheckpointError::Invalid(format!(
            "configuration implies {total} parameters"
        )));
    }
    let count = r.u32("tensor count")? as usize;
    if count != layout.len() {
        return Err(CheckpointError::ShapeMismatch {
            name: "tensor count".into(),
            expected: vec![layout.len()],
            found: vec![count],
        });
    }
    // refuse before allocating if the payload cannot possibly fit
    if bytes.len().saturating_sub(r.pos) < total * 8 {
        return Err(CheckpointError::Truncated("tensor data"));
    }
    let mut weights = Weights::zeros(&config);
    for ((name, expected), slot) in layout.iter().zip(weights.tensors_mut()) {
        let rank = r.u32("tensor rank")? as usize;
        if rank > 8 {
            return Err(CheckpointError::Invalid(format!("{name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor shape")? as usize);
        }
        if &shape != expected {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expected: expected.clone(),
                found: shape,
            });
        }
        let raw = r.take(slot.len() * 8, "tensor data")?;
        for (v, chunk) in slot.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        if let Some(bad) = slot.data().iter().find(|v| !v.is_finite()) {
            return Err(CheckpointError::Invalid(format!("{name} holds {bad}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Invalid(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(ModelParams {
        config,
        weights,
        norm_stats,
    })
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    write_file(path, to_bytes(params)?)
}

pub fn load(path: &Path) -> Result<ModelParams> {
    Ok(from_bytes(&read_file(path)?)?)
}

/// Shapes stored in a checkpoint must agree with `cfg` when the caller
/// expects a particular architecture.
pub fn ensure_config(params: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    if &params.config != cfg {
        return Err(Error::Checkpoint(CheckpointError::Invalid(format!(
            "checkpoint was built for {:?}, configuration asks for {:?}",
            params.config, cfg
        ))));
    }
    Ok(())
}
