use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::audio::AudioBuffer;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed STFT magnitudes, `T x (window / 2 + 1)` with
/// `T = floor((N - window) / hop) + 1`. Rows are labelled with frame start times.
pub fn stft_magnitude(audio: &AudioBuffer, window: usize, hop: usize) -> Result<DenseMatrix> {
    if window == 0 || !window.is_power_of_two() {
        return Err(Error::param(format!("window must be a power of two, got {window}")));
    }
    if hop == 0 || hop > window {
        return Err(Error::param(format!("hop must be in 1..={window}, got {hop}")));
    }
    let bins = window / 2 + 1;
    if audio.len() < window {
        log::warn!("audio has {} samples, shorter than one {window}-sample window", audio.len());
        return Ok(DenseMatrix::zeros(0, bins));
    }
    let frames = (audio.len() - window) / hop + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let win = hann(window);
    let mut buf = vec![Complex::new(0.0, 0.0); window];
    let mut data = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let start = t * hop;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(audio.samples[start + k] as f64 * win[k], 0.0);
        }
        fft.process(&mut buf);
        data.extend(buf[..bins].iter().map(|c| c.norm()));
    }
    let mut m = DenseMatrix::from_vec(frames, bins, data)?;
    let sr = audio.sample_rate as f64;
    m.row_axis = Some((0..frames).map(|t| (t * hop) as f64 / sr).collect());
    m.col_axis = Some((0..bins).map(|k| k as f64 * sr / window as f64).collect());
    Ok(m)
}
