//! Rasterization of annotation levels onto frame grids.

use std::ops::Range;

use super::{FrameSeries, GranularityLevel, TimeGrid};
use crate::dsp::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Phoneme inventory: the 39 CMUdict symbols plus `SP` (inter-word pause).
///
/// Column `PHONEMES.len()` of a phoneme matrix is the non-phoneme row.
pub const PHONEMES: [&str; 40] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH",
    "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH",
    "UW", "V", "W", "Y", "Z", "ZH", "SP",
];

/// Column of a phoneme symbol; CMUdict stress digits (`AH0`) are ignored.
pub fn phoneme_index(symbol: &str) -> Option<usize> {
    let base = symbol.trim_end_matches(|c: char| c.is_ascii_digit());
    let base = base.to_ascii_uppercase();
    PHONEMES.iter().position(|p| *p == base)
}

/// Frames of `grid` whose time falls in `[t0, t1)`, or `[t0, t1]` when
/// `closed_right` is set. The bounds are found by direct comparison of
/// `r_i = spacing * i` so the result matches the definition exactly.
pub fn frame_span(t0: f64, t1: f64, grid: &TimeGrid, closed_right: bool) -> Range<usize> {
    let n = grid.n_frames;
    if !(t0.is_finite() && t1.is_finite()) || n == 0 {
        return 0..0;
    }
    let first_at_or_after = |t: f64, strict: bool| -> usize {
        let guess = (t / grid.spacing).floor();
        let mut i = if guess <= 0.0 { 0 } else { (guess as usize).saturating_sub(1).min(n) };
        while i < n && (if strict { grid.time(i) <= t } else { grid.time(i) < t }) {
            i += 1;
        }
        i
    };
    let start = first_at_or_after(t0, false);
    let end = first_at_or_after(t1, closed_right);
    start..end.max(start)
}

/// Binary voice-activity series: frame `i` is 1 iff some segment has
/// `t0 <= r_i < t1`.
pub fn rasterize_vas(level: &GranularityLevel, grid: &TimeGrid) -> FrameSeries {
    let mut values = vec![0.0; grid.n_frames];
    for seg in &level.segments {
        for v in &mut values[frame_span(seg.t0, seg.t1, grid, false)] {
            *v = 1.0;
        }
    }
    FrameSeries {
        grid: *grid,
        values,
    }
}

/// Output of [`note_matrix`]: the label matrix and the notes that were skipped.
#[derive(Debug, Clone)]
pub struct NoteMatrix {
    /// `T x J` binary matrix.
    pub matrix: DenseMatrix,
    /// Indices of notes whose frequency fell outside the bin edges.
    pub out_of_range: Vec<usize>,
}

/// Binary note matrix: `Y[i][j] = 1` iff some note has `t0 <= r_i <= t1`
/// and `edges[j] < f <= edges[j + 1]`.
///
/// `edges` has `J + 1` strictly increasing values; see
/// [`crate::dsp::cqt::CqtConfig::label_edges`] for the edges that put each
/// CQT bin center at the right-closed end of its column.
pub fn note_matrix(notes: &GranularityLevel, grid: &TimeGrid, edges: &[f64]) -> Result<NoteMatrix> {
    if edges.len() < 2 {
        return Err(Error::param("note_matrix needs at least two bin edges"));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("bin edges must be strictly increasing"));
    }
    let cols = edges.len() - 1;
    let mut matrix = DenseMatrix::zeros(grid.n_frames, cols);
    let mut out_of_range = Vec::new();
    for (k, note) in notes.segments.iter().enumerate() {
        let f = note.freq();
        // first edge >= f; the column is the one ending at that edge
        let upper = edges.partition_point(|&e| e < f);
        if upper == 0 || upper == edges.len() {
            log::warn!("note {k} at {f} Hz is outside [{}, {}] Hz; skipped", edges[0], edges[cols]);
            out_of_range.push(k);
            continue;
        }
        let j = upper - 1;
        for i in frame_span(note.t0, note.t1, grid, true) {
            matrix.set(i, j, 1.0);
        }
    }
    Ok(NoteMatrix {
        matrix,
        out_of_range,
    })
}

/// Phoneme activation matrix `T x (P + 1)`.
///
/// Every phoneme of a word is active over the whole word span `[t0, t1)`;
/// the last column is 1 exactly where no phoneme is active.
pub fn phoneme_matrix(words: &GranularityLevel, grid: &TimeGrid) -> Result<DenseMatrix> {
    let p = PHONEMES.len();
    let mut z = DenseMatrix::zeros(grid.n_frames, p + 1);
    for (k, word) in words.segments.iter().enumerate() {
        let phonemes = word
            .phonemes
            .as_ref()
            .ok_or_else(|| Error::schema(format!("words[{k}] ('{}') has no phoneme list", word.text)))?;
        let cols = phonemes
            .iter()
            .map(|s| {
                phoneme_index(s)
                    .ok_or_else(|| Error::schema(format!("words[{k}]: unknown phoneme symbol '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        for i in frame_span(word.t0, word.t1, grid, false) {
            for &c in &cols {
                z.set(i, c, 1.0);
            }
        }
    }
    for i in 0..grid.n_frames {
        let active = z.row(i)[..p].iter().any(|&v| v > 0.0);
        z.set(i, p, if active { 0.0 } else { 1.0 });
    }
    Ok(z)
}

/// Row-wise softmax over the phoneme dimension.
pub fn softmax_phoneme_prep(z: &DenseMatrix) -> DenseMatrix {
    let mut out = z.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return;
    }
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
