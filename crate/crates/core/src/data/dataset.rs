use crate::dsp::{crop_to_model_bins, stft, NormStats, StftConfig};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::{BearingId, BearingRun, Recording};

/// One training or evaluation example: `W` consecutive normalised
/// spectrograms labelled with the RUL at the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[W, frames, bins]`
    pub window: Tensor,
    pub label_rul_pct: f64,
    pub bearing_id: BearingId,
    pub end_index: usize,
}

/// Remaining life at recording `end_index` of an `n`-recording run, in
/// percent: 100 at the first capture, 0 at the last.
pub fn rul_label_pct(end_index: usize, n: usize) -> Result<f64> {
    if n < 2 || end_index >= n {
        return Err(Error::arg(format!(
            "label needs 0 ≤ end_index < n with n ≥ 2, got end_index {end_index}, n {n}"
        )));
    }
    Ok(100.0 * (n - 1 - end_index) as f64 / (n - 1) as f64)
}

/// Number of windows of `w` over `n` recordings at `stride`.
pub fn window_count(n: usize, w: usize, stride: usize) -> usize {
    if w == 0 || stride == 0 || n < w {
        0
    } else {
        (n - w) / stride + 1
    }
}

/// Raw (un-normalised) model-width spectrogram of one recording.
pub fn recording_spectrogram(rec: &Recording, stft_cfg: &StftConfig, bins: usize) -> Result<Tensor> {
    Ok(crop_to_model_bins(&stft(&rec.samples, stft_cfg)?, bins)?.into_magnitudes())
}

/// A bearing run after the STFT, kept un-normalised so different folds can
/// apply different statistics without redoing the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingFeatures {
    pub id: BearingId,
    /// One `[frames, bins]` map per recording.
    pub spectra: Vec<Tensor>,
    pub elapsed_s: Vec<f64>,
}

impl BearingFeatures {
    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }
}

pub fn featurize(run: &BearingRun, stft_cfg: &StftConfig, bins: usize) -> Result<BearingFeatures> {
    let spectra = run
        .recordings
        .iter()
        .map(|r| recording_spectrogram(r, stft_cfg, bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(BearingFeatures {
        id: run.id.clone(),
        spectra,
        elapsed_s: run.elapsed_s(),
    })
}

/// Stacks recordings `end+1−w ..= end` into a `[w, frames, bins]` window,
/// normalised with `stats` when given.
pub fn window_at(
    features: &BearingFeatures,
    end: usize,
    w: usize,
    stats: Option<&NormStats>,
) -> Result<Tensor> {
    if w == 0 || end + 1 < w || end >= features.len() {
        return Err(Error::arg(format!(
            "window of {w} ending at {end} does not fit a run of {}",
            features.len()
        )));
    }
    let shape = features.spectra[end].shape().to_vec();
    let mut data = Vec::with_capacity(w * features.spectra[end].len());
    for map in &features.spectra[end + 1 - w..=end] {
        if map.shape() != shape.as_slice() {
            return Err(Error::dim("window_at", "recordings differ in spectrogram shape"));
        }
        match stats {
            Some(s) => data.extend(s.apply(map).into_data()),
            None => data.extend_from_slice(map.data()),
        }
    }
    Tensor::from_vec(&[w, shape[0], shape[1]], data)
}

/// Sliding windows over a featurised run.
pub fn samples_from_features(
    features: &BearingFeatures,
    w: usize,
    stride: usize,
    stats: Option<&NormStats>,
) -> Result<Vec<Sample>> {
    if stride == 0 {
        return Err(Error::arg("stride must be positive"));
    }
    let n = features.len();
    if w == 0 || n < w {
        return Err(Error::arg(format!(
            "bearing {} has {n} recordings, fewer than the window of {w}",
            features.id
        )));
    }
    (0..window_count(n, w, stride))
        .map(|k| {
            let end = k * stride + w - 1;
            Ok(Sample {
                window: window_at(features, end, w, stats)?,
                label_rul_pct: rul_label_pct(end, n)?,
                bearing_id: features.id.clone(),
                end_index: end,
            })
        })
        .collect()
}

/// STFT, crop to `bins`, normalise and window one run.
pub fn build_dataset(
    run: &BearingRun,
    stft_cfg: &StftConfig,
    bins: usize,
    w: usize,
    stride: usize,
    stats: Option<&NormStats>,
) -> Result<Vec<Sample>> {
    samples_from_features(&featurize(run, stft_cfg, bins)?, w, stride, stats)
}

/// Global min and max over a training split's spectrogram values.
pub fn compute_norm_stats<'a>(maps: impl IntoIterator<Item = &'a Tensor>) -> Result<NormStats> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for m in maps {
        any = true;
        for &v in m.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !any {
        return Err(Error::arg("cannot compute normalisation stats of an empty split"));
    }
    NormStats::new(lo, hi)
}
