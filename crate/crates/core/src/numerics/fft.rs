//! Real-input FFT helpers on top of `rustfft`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Full-length (N-bin) unnormalized DFT of a real series,
/// `X[k] = Σ x[t] e^{-2πi kt/N}`.
///
/// `fs` only matters through [`bin_frequencies`]; the transform itself is
/// independent of the sample rate.
pub fn fft_real(series: &[f64]) -> Result<Vec<Complex64>> {
    if series.is_empty() {
        return Err(Error::Empty("fft input"));
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    Ok(buf)
}

/// Inverse of [`fft_real`] for a Hermitian-symmetric spectrum; returns the
/// real part with the `1/N` normalization applied.
pub fn ifft_real(spectrum: &[Complex64]) -> Result<Vec<f64>> {
    if spectrum.is_empty() {
        return Err(Error::Empty("ifft input"));
    }
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.into_iter().map(|z| z.re * scale).collect())
}

/// Frequencies (Hz) of bins `0..=N/2` for a length-`n` transform at `fs`.
pub fn bin_frequencies(n: usize, fs: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| k as f64 * fs / n as f64).collect()
}
