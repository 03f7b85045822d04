//! Self-supervised label-cleansing data: where the note labels agree with
//! an F0 salience estimate, which frames are trustworthy, realistic wrong
//! labels, and utilities that consume per-frame error probabilities.

mod dataset;
mod deform;

pub use dataset::{
    assemble_dataset, cut_patch, decode_records, encode_record, CleansingConfig, CleansingExample, Provenance,
    Record, TrackDataset, TrackInput, CONTEXT_FRAMES,
};
pub use deform::{apply_deformation, deform, note_blocks, AppliedOp, DeformOp, DeformationSpec, NoteBlock};

use serde::{Deserialize, Serialize};

use crate::annotations::FrameSeries;
use crate::dsp::DenseMatrix;
use crate::error::{Error, Result};

/// Default moving-average length for the patch agreement.
pub const K_WINDOW: usize = 20;
/// Default neighbourhood for silence positives.
pub const SILENCE_WINDOW: usize = 200;

/// Inclusive window `[i - w/2, i + (w-1)/2]` clipped to `0..n`.
fn window(i: usize, w: usize, n: usize) -> (usize, usize) {
    (i.saturating_sub(w / 2), (i + (w.max(1) - 1) / 2).min(n - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementScores {
    pub kappa_l: FrameSeries,
    pub kappa_p: FrameSeries,
    pub k_window: usize,
}

/// Per-frame `max_j (y_j * s_j)` of a `T x J` label matrix and salience,
/// and its `k_window`-point centred moving average (truncated at the edges).
pub fn agreement(yhat: &DenseMatrix, salience: &DenseMatrix, spacing: f64, k_window: usize) -> Result<AgreementScores> {
    if yhat.shape() != salience.shape() {
        return Err(Error::shape(format!(
            "labels are {:?} but salience is {:?}",
            yhat.shape(),
            salience.shape()
        )));
    }
    if k_window == 0 {
        return Err(Error::param("k_window must be at least 1"));
    }
    let t = yhat.rows();
    let grid = crate::annotations::TimeGrid::new(spacing, t)?;
    let kl: Vec<f64> = (0..t)
        .map(|i| {
            yhat.row(i)
                .iter()
                .zip(salience.row(i))
                .map(|(y, s)| y * s)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut prefix = vec![0.0; t + 1];
    for i in 0..t {
        prefix[i + 1] = prefix[i] + kl[i];
    }
    let kp: Vec<f64> = (0..t)
        .map(|i| {
            let (a, b) = window(i, k_window, t);
            (prefix[b + 1] - prefix[a]) / (b + 1 - a) as f64
        })
        .collect();
    Ok(AgreementScores {
        kappa_l: FrameSeries::new(grid, kl)?,
        kappa_p: FrameSeries::new(grid, kp)?,
        k_window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Whether a frame's scores pass the thresholds of `split`.
///
/// Test needs `k_l > 0.999` and `k_p > 0.85`; train needs
/// `0.9 < k_l <= 0.999` and `0.7 < k_p <= 0.85`. The `k_l` intervals do
/// not intersect, so no frame is in both.
pub fn passes(kappa_l: f64, kappa_p: f64, split: Split) -> bool {
    match split {
        Split::Test => kappa_l > 0.999 && kappa_p > 0.85,
        Split::Train => kappa_l > 0.9 && kappa_l <= 0.999 && kappa_p > 0.7 && kappa_p <= 0.85,
    }
}

pub fn select_likely_correct(scores: &AgreementScores, split: Split) -> Vec<usize> {
    (0..scores.kappa_l.len())
        .filter(|&i| passes(scores.kappa_l.values[i], scores.kappa_p.values[i], split))
        .collect()
}

/// Frames whose whole `window`-frame neighbourhood has no label and vocal
/// energy below `threshold_db`.
pub fn select_silence_correct(
    vocals_energy_db: &FrameSeries,
    yhat: &DenseMatrix,
    window_len: usize,
    threshold_db: f64,
) -> Result<Vec<usize>> {
    let t = yhat.rows();
    if vocals_energy_db.len() != t {
        return Err(Error::shape(format!("{} energy frames for {t} label frames", vocals_energy_db.len())));
    }
    let bad: Vec<usize> = (0..t)
        .map(|i| {
            let labelled = yhat.row(i).iter().any(|&v| v != 0.0);
            let loud = !(vocals_energy_db.values[i] < threshold_db);
            usize::from(labelled || loud)
        })
        .collect();
    let mut prefix = vec![0usize; t + 1];
    for i in 0..t {
        prefix[i + 1] = prefix[i] + bad[i];
    }
    Ok((0..t)
        .filter(|&i| {
            let (a, b) = window(i, window_len, t);
            prefix[b + 1] == prefix[a]
        })
        .collect())
}

fn check_g(g: &FrameSeries) -> Result<()> {
    match g.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::param(format!("error probability at frame {i} is outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Frames treated as correctly labelled: `g < threshold`.
pub fn filter_frames(g: &FrameSeries, threshold: f64) -> Result<Vec<usize>> {
    check_g(g)?;
    Ok((0..g.len()).filter(|&i| g.values[i] < threshold).collect())
}

/// Per-frame loss weights `1 - g`.
pub fn sample_weights(g: &FrameSeries) -> Result<FrameSeries> {
    check_g(g)?;
    FrameSeries::new(g.grid, g.values.iter().map(|v| 1.0 - v).collect())
}

/// Fraction of frames with `g >= 0.5`; 0 for an empty track.
pub fn error_rate(g: &FrameSeries) -> Result<f64> {
    check_g(g)?;
    if g.is_empty() {
        return Ok(0.0);
    }
    Ok(g.values.iter().filter(|&&v| v >= 0.5).count() as f64 / g.len() as f64)
}

/// Stand-in error probability `1 - k_l` for pipelines without a trained model.
pub fn baseline_scores(scores: &AgreementScores) -> FrameSeries {
    FrameSeries {
        grid: scores.kappa_l.grid,
        values: scores.kappa_l.values.iter().map(|k| (1.0 - k).clamp(0.0, 1.0)).collect(),
    }
}
