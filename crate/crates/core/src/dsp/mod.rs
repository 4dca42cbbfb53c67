//! Hamming-windowed short-time Fourier analysis of vibration recordings.

pub mod fft;
pub mod stft;
pub mod window;

pub use fft::{fft, fft_in_place};
pub use stft::{
    crop_to_model_bins, denormalize, normalize, stft, stft_complex, windowed_frames, BoundaryPad,
    NormStats, Spectrogram, StftConfig,
};
pub use window::{hamming_window, WindowFn, WindowKind};
