//! Audio ingestion and spectral features.

pub mod audio;
pub mod cqt;
pub mod energy;
pub mod matrix;
pub mod mel;
pub mod stft;

pub use audio::AudioBuffer;
pub use cqt::{cqt, normalize_loglike, CqtConfig};
pub use energy::{frame_energy_db, matrix_energy_db, silent_mask, SILENCE_DB};
pub use matrix::{DenseMatrix, Tensor3};
pub use mel::{log_mel, mel_filterbank};
pub use stft::stft_magnitude;
