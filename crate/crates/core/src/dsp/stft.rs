use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::fft::fft_in_place;
use super::window::hamming_window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPad {
    /// `segment_len / 2` zeros on both ends, so frames are centred on
    /// multiples of the hop.
    #[default]
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub sample_rate_hz: f64,
    pub segment_len: usize,
    pub hop: usize,
    pub boundary_pad: BoundaryPad,
    pub crop_bins: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 25_600.0,
            segment_len: 512,
            hop: 256,
            boundary_pad: BoundaryPad::Zeros,
            crop_bins: 129,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.segment_len < 2 || !self.segment_len.is_power_of_two() {
            return Err(Error::Config(format!(
                "segment length must be a power of two ≥ 2, got {}",
                self.segment_len
            )));
        }
        if self.hop == 0 || self.hop > self.segment_len {
            return Err(Error::Config(format!(
                "hop must lie in 1..={}, got {}",
                self.segment_len, self.hop
            )));
        }
        if self.crop_bins == 0 || self.crop_bins > self.one_sided_bins() {
            return Err(Error::Config(format!(
                "crop_bins must lie in 1..={}, got {}",
                self.one_sided_bins(),
                self.crop_bins
            )));
        }
        Ok(())
    }

    pub fn one_sided_bins(&self) -> usize {
        self.segment_len / 2 + 1
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_len as f64
    }

    /// Number of centred frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len / self.hop + 1
    }
}

/// Time × frequency magnitude map with its axis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Tensor,
    frame_times_s: Vec<f64>,
    bin_freqs_hz: Vec<f64>,
}

impl Spectrogram {
    pub fn new(magnitudes: Tensor, frame_times_s: Vec<f64>, bin_freqs_hz: Vec<f64>) -> Result<Self> {
        magnitudes.require_rank(2, "spectrogram", "magnitudes")?;
        let (frames, bins) = (magnitudes.shape()[0], magnitudes.shape()[1]);
        if frame_times_s.len() != frames || bin_freqs_hz.len() != bins {
            return Err(Error::dim(
                "spectrogram",
                format!(
                    "{frames}×{bins} map with {} frame times and {} bin frequencies",
                    frame_times_s.len(),
                    bin_freqs_hz.len()
                ),
            ));
        }
        Ok(Self {
            magnitudes,
            frame_times_s,
            bin_freqs_hz,
        })
    }

    pub fn magnitudes(&self) -> &Tensor {
        &self.magnitudes
    }

    pub fn into_magnitudes(self) -> Tensor {
        self.magnitudes
    }

    pub fn frame_times_s(&self) -> &[f64] {
        &self.frame_times_s
    }

    pub fn bin_freqs_hz(&self) -> &[f64] {
        &self.bin_freqs_hz
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.shape()[0]
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.shape()[1]
    }
}

fn check_signal(signal: &Tensor, cfg: &StftConfig) -> Result<()> {
    cfg.validate()?;
    signal.require_rank(1, "stft", "signal")?;
    let len = signal.len();
    if len % cfg.hop != 0 {
        let nearest = len.div_ceil(cfg.hop).max(1) * cfg.hop;
        return Err(Error::arg(format!(
            "signal of {len} samples is not a multiple of hop {}; a {nearest}-sample recording \
             would give {} frames",
            cfg.hop,
            cfg.frame_count(nearest)
        )));
    }
    Ok(())
}

/// Windowed, zero-padded frames (`x_t(τ) = x(τ)·h(τ − t)`), one per hop.
pub fn windowed_frames(signal: &Tensor, cfg: &StftConfig) -> Result<Vec<Vec<f64>>> {
    check_signal(signal, cfg)?;
    let window = hamming_window(cfg.segment_len)?;
    let x = signal.data();
    let pad = cfg.segment_len / 2;
    let frames = cfg.frame_count(x.len());
    Ok((0..frames)
        .map(|f| {
            // padded index p maps to signal index p − pad
            let start = f * cfg.hop;
            window
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    (start + k)
                        .checked_sub(pad)
                        .and_then(|i| x.get(i))
                        .map_or(0.0, |v| v * w)
                })
                .collect()
        })
        .collect())
}

/// Full complex spectrum (all `segment_len` bins) of every frame.
pub fn stft_complex(signal: &Tensor, cfg: &StftConfig) -> Result<Vec<Vec<Complex64>>> {
    windowed_frames(signal, cfg)?
        .into_iter()
        .map(|frame| {
            let mut buf: Vec<Complex64> = frame.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            fft_in_place(&mut buf)?;
            Ok(buf)
        })
        .collect()
}

/// Magnitude STFT cropped to the lowest `cfg.crop_bins` one-sided bins.
///
/// With the defaults, a 2560-sample recording gives 11 frames × 129 bins
/// spanning 0–6400 Hz.
pub fn stft(signal: &Tensor, cfg: &StftConfig) -> Result<Spectrogram> {
    let spectra = stft_complex(signal, cfg)?;
    let frames = spectra.len();
    let bins = cfg.crop_bins;
    let mut mags = Vec::with_capacity(frames * bins);
    for spectrum in &spectra {
        mags.extend(spectrum[..bins].iter().map(|c| c.norm()));
    }
    let df = cfg.bin_spacing_hz();
    Spectrogram::new(
        Tensor::from_vec(&[frames, bins], mags)?,
        (0..frames)
            .map(|f| (f * cfg.hop) as f64 / cfg.sample_rate_hz)
            .collect(),
        (0..bins).map(|k| k as f64 * df).collect(),
    )
}

/// Keeps the lowest `bins` frequency columns.
pub fn crop_to_model_bins(s: &Spectrogram, bins: usize) -> Result<Spectrogram> {
    if bins == 0 || bins > s.bins() {
        return Err(Error::arg(format!(
            "cannot crop a {}-bin spectrogram to {bins} bins",
            s.bins()
        )));
    }
    let frames = s.frames();
    let src = s.magnitudes.data();
    let mut out = Vec::with_capacity(frames * bins);
    for row in src.chunks_exact(s.bins()) {
        out.extend_from_slice(&row[..bins]);
    }
    Spectrogram::new(
        Tensor::from_vec(&[frames, bins], out)?,
        s.frame_times_s.clone(),
        s.bin_freqs_hz[..bins].to_vec(),
    )
}

/// Dataset-wide min/max used for input scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let s = Self { min, max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.max <= self.min {
            return Err(Error::Config(format!(
                "degenerate normalisation stats: min {}, max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn apply(&self, t: &Tensor) -> Tensor {
        let span = self.max - self.min;
        t.map(|v| (v - self.min) / span)
    }

    pub fn invert(&self, t: &Tensor) -> Tensor {
        let span = self.max - self.min;
        t.map(|v| v * span + self.min)
    }
}

/// Min-max scaling with training-split statistics.
pub fn normalize(s: &Spectrogram, stats: &NormStats) -> Result<Spectrogram> {
    stats.validate()?;
    Spectrogram::new(
        stats.apply(&s.magnitudes),
        s.frame_times_s.clone(),
        s.bin_freqs_hz.clone(),
    )
}

pub fn denormalize(s: &Spectrogram, stats: &NormStats) -> Result<Spectrogram> {
    stats.validate()?;
    Spectrogram::new(
        stats.invert(&s.magnitudes),
        s.frame_times_s.clone(),
        s.bin_freqs_hz.clone(),
    )
}
