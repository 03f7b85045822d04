//! Constant-Q transform via sparse spectral kernels.
//!
//! Each bin `b` is centred at `f_b = f_min * 2^(b / p)` and analysed with a
//! Hann-windowed complex exponential of `ceil(Q * sr / f_b)` samples, where
//! `Q = 1 / (2^(1/p) - 1)`. The kernels are moved to the frequency domain
//! once and entries below [`KERNEL_THRESHOLD`] are dropped, so each frame
//! costs one FFT plus a sparse dot product per bin.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::audio::AudioBuffer;
use super::matrix::DenseMatrix;
use super::stft::hann;
use crate::error::{Error, Result};

pub const KERNEL_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CqtConfig {
    pub f_min: f64,
    pub bins_per_octave: usize,
    pub n_octaves: usize,
    pub sample_rate: u32,
    pub hop: usize,
}

impl Default for CqtConfig {
    /// Six octaves from C1 at one bin per semitone, 22050 Hz, hop 256.
    fn default() -> Self {
        CqtConfig {
            f_min: 32.70,
            bins_per_octave: 12,
            n_octaves: 6,
            sample_rate: 22050,
            hop: 256,
        }
    }
}

impl CqtConfig {
    pub fn n_bins(&self) -> usize {
        self.bins_per_octave * self.n_octaves
    }

    pub fn center(&self, b: usize) -> f64 {
        self.f_min * 2f64.powf(b as f64 / self.bins_per_octave as f64)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|b| self.center(b)).collect()
    }

    /// `J + 1` edges for [`crate::annotations::note_matrix`]: column `j`
    /// covers `(f_{j-1}, f_j]`, with `f_{-1}` one bin below `f_min`.
    pub fn label_edges(&self) -> Vec<f64> {
        let p = self.bins_per_octave as f64;
        std::iter::once(self.f_min * 2f64.powf(-1.0 / p))
            .chain(self.centers())
            .collect()
    }

    /// Constant ratio of bandwidth to center frequency.
    pub fn q_ratio(&self) -> f64 {
        2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0
    }

    /// Frame spacing in seconds.
    pub fn frame_time(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    /// Nearest bin (possibly outside `0..J`) of a frequency on this ladder.
    pub fn nearest_bin(&self, f: f64) -> Option<i64> {
        if !(f > 0.0) || !f.is_finite() {
            return None;
        }
        Some((self.bins_per_octave as f64 * (f / self.f_min).log2()).round() as i64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0) || self.bins_per_octave == 0 || self.n_octaves == 0 {
            return Err(Error::param("cqt needs f_min > 0 and at least one bin"));
        }
        if self.sample_rate == 0 || self.hop == 0 {
            return Err(Error::param("cqt needs positive sample rate and hop"));
        }
        let top = self.center(self.n_bins() - 1);
        let nyquist = self.sample_rate as f64 / 2.0;
        if top >= nyquist {
            return Err(Error::param(format!(
                "highest cqt bin {top:.1} Hz is not below Nyquist {nyquist} Hz"
            )));
        }
        Ok(())
    }
}

struct SpectralKernel {
    fft_len: usize,
    /// Per bin: (fft index, conj(kernel) / fft_len).
    bins: Vec<Vec<(usize, Complex<f64>)>>,
}

impl SpectralKernel {
    fn build(cfg: &CqtConfig, planner: &mut FftPlanner<f64>) -> Self {
        let sr = cfg.sample_rate as f64;
        let q = 1.0 / cfg.q_ratio();
        let longest = (q * sr / cfg.f_min).ceil() as usize;
        let fft_len = longest.next_power_of_two();
        let fft = planner.plan_fft_forward(fft_len);
        let bins = (0..cfg.n_bins())
            .map(|b| {
                let len = (q * sr / cfg.center(b)).ceil() as usize;
                let win = hann(len);
                let start = (fft_len - len) / 2;
                let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
                for n in 0..len {
                    let phase = 2.0 * std::f64::consts::PI * q * n as f64 / len as f64;
                    buf[start + n] = Complex::from_polar(win[n] / len as f64, phase);
                }
                fft.process(&mut buf);
                buf.iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() >= KERNEL_THRESHOLD)
                    .map(|(j, c)| (j, c.conj() / fft_len as f64))
                    .collect()
            })
            .collect();
        SpectralKernel { fft_len, bins }
    }
}

/// CQT magnitudes `T x J`, frames centred at `t * hop` (so `T = N / hop + 1`).
pub fn cqt(audio: &AudioBuffer, cfg: &CqtConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    if audio.sample_rate != cfg.sample_rate {
        return Err(Error::param(format!(
            "audio is at {} Hz but the cqt is configured for {} Hz",
            audio.sample_rate, cfg.sample_rate
        )));
    }
    let mut planner = FftPlanner::new();
    let kernel = SpectralKernel::build(cfg, &mut planner);
    let fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(kernel.fft_len);
    let frames = audio.len() / cfg.hop + 1;
    let half = kernel.fft_len / 2;
    let j = cfg.n_bins();
    let rows: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map_init(
            || vec![Complex::new(0.0, 0.0); kernel.fft_len],
            |buf, t| {
                let center = (t * cfg.hop) as isize;
                for (k, b) in buf.iter_mut().enumerate() {
                    let idx = center - half as isize + k as isize;
                    let s = if idx >= 0 && (idx as usize) < audio.len() {
                        audio.samples[idx as usize] as f64
                    } else {
                        0.0
                    };
                    *b = Complex::new(s, 0.0);
                }
                fft.process(buf);
                kernel
                    .bins
                    .iter()
                    .map(|taps| taps.iter().map(|&(i, w)| buf[i] * w).sum::<Complex<f64>>().norm())
                    .collect()
            },
        )
        .collect();
    let mut m = DenseMatrix::from_vec(frames, j, rows.concat())?;
    m.row_axis = Some((0..frames).map(|t| t as f64 * cfg.frame_time()).collect());
    m.col_axis = Some(cfg.centers());
    Ok(m)
}

/// `log(1 + x)` followed by min-max scaling of the whole matrix to `[0, 1]`.
/// A constant matrix maps to zeros.
pub fn normalize_loglike(m: &DenseMatrix) -> DenseMatrix {
    let logged = m.map(|v| v.max(0.0).ln_1p());
    match logged.min_max() {
        Some((lo, hi)) if hi > lo => logged.map(|v| (v - lo) / (hi - lo)),
        _ => logged.map(|_| 0.0),
    }
}
