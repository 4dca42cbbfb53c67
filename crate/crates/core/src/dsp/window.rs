use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
}

/// Tapering window applied to each STFT frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFn {
    kind: WindowKind,
    coeffs: Vec<f64>,
}

impl WindowFn {
    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Symmetric Hamming window `w[k] = 0.54 − 0.46·cos(2πk/(n−1))`.
///
/// Coefficients are computed for the first half and mirrored, so
/// `w[k] == w[n−1−k]` holds bit-for-bit.
pub fn hamming_window(n: usize) -> Result<WindowFn> {
    if n < 2 {
        return Err(Error::arg(format!("window length must be at least 2, got {n}")));
    }
    let denom = (n - 1) as f64;
    let mut coeffs = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let w = 0.54 - 0.46 * (2.0 * PI * k as f64 / denom).cos();
        coeffs[k] = w;
        coeffs[n - 1 - k] = w;
    }
    Ok(WindowFn {
        kind: WindowKind::Hamming,
        coeffs,
    })
}
