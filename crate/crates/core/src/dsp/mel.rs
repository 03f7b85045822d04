//! Slaney-style mel filterbank and log-mel compression.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(f: f64) -> f64 {
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        MIN_LOG_MEL + (f / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    if m < MIN_LOG_MEL {
        m * F_SP
    } else {
        MIN_LOG_HZ * ((m - MIN_LOG_MEL) * log_step()).exp()
    }
}

/// Area-normalized triangular filters from 0 Hz to Nyquist, `n_mels x (n_fft/2 + 1)`.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sr: f64) -> Result<DenseMatrix> {
    let bins = n_fft / 2 + 1;
    if n_mels == 0 || n_mels > bins {
        return Err(Error::param(format!(
            "n_mels must be in 1..={bins} for a {n_fft}-point spectrum, got {n_mels}"
        )));
    }
    let top = hz_to_mel(sr / 2.0);
    let hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * sr / n_fft as f64).collect();
    Ok(DenseMatrix::from_fn(n_mels, bins, |m, k| {
        let (lo, mid, hi) = (hz[m], hz[m + 1], hz[m + 2]);
        let rise = (freqs[k] - lo) / (mid - lo);
        let fall = (hi - freqs[k]) / (hi - mid);
        let w = rise.min(fall).max(0.0);
        w * 2.0 / (hi - lo)
    }))
}

/// `log(1 + mel(power))` for a magnitude spectrogram from [`super::stft_magnitude`].
pub fn log_mel(spec: &DenseMatrix, n_mels: usize, sr: f64) -> Result<DenseMatrix> {
    if spec.cols() < 2 {
        return Err(Error::param("spectrogram needs at least two frequency bins"));
    }
    let n_fft = 2 * (spec.cols() - 1);
    let bank = mel_filterbank(n_mels, n_fft, sr)?;
    let mut out = DenseMatrix::from_fn(spec.rows(), n_mels, |t, m| {
        let row = spec.row(t);
        let energy: f64 = bank.row(m).iter().zip(row).map(|(w, x)| w * x * x).sum();
        energy.ln_1p()
    });
    out.row_axis = spec.row_axis.clone();
    Ok(out)
}
