//! Frame energies relative to the track maximum.

use crate::annotations::{FrameSeries, TimeGrid};
use crate::error::{Error, Result};

use super::audio::AudioBuffer;
use super::matrix::DenseMatrix;

/// Silence threshold relative to the loudest frame.
pub const SILENCE_DB: f64 = -25.0;

fn to_relative_db(energies: &[f64]) -> Vec<f64> {
    let max = energies.iter().copied().fold(0.0, f64::max);
    energies
        .iter()
        .map(|&e| if max > 0.0 && e > 0.0 { 10.0 * (e / max).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Mean-square energy of each grid frame `[r_i, r_i + spacing)` in dB
/// relative to the loudest frame. Silent frames are `-inf`.
pub fn frame_energy_db(audio: &AudioBuffer, grid: &TimeGrid) -> Result<FrameSeries> {
    let sr = audio.sample_rate as f64;
    let energies: Vec<f64> = (0..grid.n_frames)
        .map(|i| {
            let a = ((grid.time(i) * sr).round() as usize).min(audio.len());
            let b = (((grid.time(i) + grid.spacing) * sr).round() as usize).min(audio.len());
            if b <= a {
                return 0.0;
            }
            audio.samples[a..b].iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / (b - a) as f64
        })
        .collect();
    FrameSeries::new(*grid, to_relative_db(&energies))
}

/// Per-row sum-of-squares energy of a magnitude matrix, in dB relative to the loudest row.
pub fn matrix_energy_db(m: &DenseMatrix, grid: &TimeGrid) -> Result<FrameSeries> {
    if m.rows() != grid.n_frames {
        return Err(Error::shape(format!(
            "matrix has {} rows but grid has {} frames",
            m.rows(),
            grid.n_frames
        )));
    }
    let energies: Vec<f64> = m.row_iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    FrameSeries::new(*grid, to_relative_db(&energies))
}

/// True where the relative level is below `threshold_db`.
pub fn silent_mask(energy_db: &FrameSeries, threshold_db: f64) -> Vec<bool> {
    energy_db.values.iter().map(|&db| db < threshold_db).collect()
}
