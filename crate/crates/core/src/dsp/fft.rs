use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Forward DFT `X[k] = Σ x[n]·e^{−j2πkn/N}` via iterative radix-2
/// decimation in time. No normalisation is applied.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut buf = input.to_vec();
    fft_in_place(&mut buf)?;
    Ok(buf)
}

pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::arg(format!(
            "fft length must be a power of two, got {n}"
        )));
    }
    if n == 1 {
        return Ok(());
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * step];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn impulse_is_flat() {
        let out = fft(&re(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        for v in out {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_is_dc_only() {
        let out = fft(&re(&[1.0; 4])).unwrap();
        assert!((out[0] - Complex64::new(4.0, 0.0)).norm() < 1e-15);
        for v in &out[1..] {
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(fft(&re(&[1.0; 6])).is_err());
        assert!(fft(&[]).is_err());
        assert_eq!(fft(&re(&[2.5])).unwrap(), re(&[2.5]));
    }
}
