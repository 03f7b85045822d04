//! # lyraline
//!
//! Numerical toolkit for time-aligned karaoke annotations.
//!
//! The crate turns note/word/line/paragraph annotations into frame-level
//! matrices and aligns them against audio-derived probability streams:
//!
//! - [`annotations`]: hierarchical data model, validation, rasterization
//!   (voice activity, note and phoneme matrices) and paragraph merging.
//! - [`dsp`]: STFT, log-mel, constant-Q transform, energy analysis and the
//!   `MMX1`/`MMX3` matrix formats.
//! - [`global_align`]: normalized cross-correlation over offset and frame
//!   rate, candidate selection and frequency transposition search.
//! - [`local_align`]: DTW and blank-interleaved note-graph Viterbi decoding.
//! - [`ssm`]: text and audio self-similarity matrices and patch extraction.
//! - [`cleansing`]: agreement scoring and self-supervised example generation
//!   for label-noise detection.
//! - [`conditioning`]: FiLM weak/strong conditioning and parameter counts.
//! - [`metrics`]: PES/EPS, frame accuracy and deviation ranking.
//! - [`synth`]: seeded synthetic songs, audio and probability streams.
//!
//! Everything is pure and deterministic; randomized steps take explicit seeds.

pub mod annotations;
pub mod cleansing;
pub mod conditioning;
pub mod dsp;
pub mod error;
pub mod global_align;
pub mod local_align;
pub mod metrics;
pub mod ssm;
pub mod synth;
pub mod text;

pub use annotations::{
    AlignedSegment, FrameSeries, Granularity, GranularityLevel, SongAnnotations, TimeGrid,
};
pub use dsp::matrix::{DenseMatrix, Tensor3};
pub use error::{Error, Result};
