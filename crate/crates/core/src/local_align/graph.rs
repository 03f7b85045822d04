use serde::{Deserialize, Serialize};

use crate::annotations::{AlignedSegment, GranularityLevel};
use crate::dsp::cqt::CqtConfig;
use crate::dsp::DenseMatrix;
use crate::error::{Error, Result};

/// Symbols of the text observation columns.
pub const TEXT_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";

/// What a note state is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    #[default]
    Pitch,
    Text,
    Joint,
}

impl std::str::FromStr for StateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pitch" => Ok(StateMode::Pitch),
            "text" => Ok(StateMode::Text),
            "joint" => Ok(StateMode::Joint),
            _ => Err(Error::param(format!("unknown state mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Blank,
    Note(usize),
}

/// Blank-interleaved state sequence `[e, n_0, e, n_1, ..., n_{K-1}, e]`.
///
/// A blank may stay or enter the next note; a note may stay, leave to the
/// following blank, or go straight to the next note.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteStateGraph {
    pub mode: StateMode,
    pub octave_fold: bool,
    pub bins_per_octave: usize,
    notes: Vec<AlignedSegment>,
    /// Ladder bin per note (unfolded, so variants can shift it).
    pitch_bins: Vec<i64>,
    text_symbols: Vec<usize>,
}

/// Index into [`TEXT_ALPHABET`] of the first letter of `text`.
pub fn text_symbol(text: &str) -> Option<usize> {
    text.chars()
        .flat_map(char::to_lowercase)
        .find_map(|c| TEXT_ALPHABET.find(c))
}

/// Builds the state graph for `notes`. Pitch symbols are the nearest
/// semitone on `ladder`; text symbols the first letter of the note text.
pub fn build_graph(
    notes: &GranularityLevel,
    mode: StateMode,
    octave_fold: bool,
    ladder: &CqtConfig,
) -> Result<NoteStateGraph> {
    if notes.is_empty() {
        return Err(Error::param("state graph needs at least one note"));
    }
    let needs_pitch = mode != StateMode::Text;
    let needs_text = mode != StateMode::Pitch;
    let j = ladder.n_bins() as i64;
    let mut pitch_bins = Vec::with_capacity(notes.len());
    let mut text_symbols = Vec::with_capacity(notes.len());
    for (k, n) in notes.segments.iter().enumerate() {
        let bin = ladder.nearest_bin(n.freq()).filter(|b| (0..j).contains(b));
        match bin {
            Some(b) => pitch_bins.push(b),
            None if needs_pitch => {
                return Err(Error::param(format!(
                    "note {k} ({} Hz) cannot be quantized to the ladder",
                    n.freq()
                )))
            }
            None => pitch_bins.push(0),
        }
        match text_symbol(&n.text) {
            Some(c) => text_symbols.push(c),
            None if needs_text => {
                return Err(Error::param(format!("note {k} text {:?} has no letter", n.text)))
            }
            None => text_symbols.push(0),
        }
    }
    Ok(NoteStateGraph {
        mode,
        octave_fold,
        bins_per_octave: ladder.bins_per_octave,
        notes: notes.segments.clone(),
        pitch_bins,
        text_symbols,
    })
}

impl NoteStateGraph {
    pub fn n_notes(&self) -> usize {
        self.notes.len()
    }

    pub fn n_states(&self) -> usize {
        2 * self.notes.len() + 1
    }

    pub fn state(&self, s: usize) -> State {
        if s % 2 == 0 {
            State::Blank
        } else {
            State::Note(s / 2)
        }
    }

    pub fn states(&self) -> Vec<State> {
        (0..self.n_states()).map(|s| self.state(s)).collect()
    }

    pub fn notes(&self) -> &[AlignedSegment] {
        &self.notes
    }

    pub fn pitch_bin(&self, k: usize) -> i64 {
        self.pitch_bins[k]
    }

    /// Pitch symbol of note `k`: its bin, reduced to one octave when folded.
    pub fn pitch_symbol(&self, k: usize) -> i64 {
        if self.octave_fold {
            self.pitch_bins[k].rem_euclid(self.bins_per_octave as i64)
        } else {
            self.pitch_bins[k]
        }
    }

    pub fn text_symbol(&self, k: usize) -> usize {
        self.text_symbols[k]
    }

    /// Copy with note `k`'s pitch moved by `shifts[k]` bins; `None` if a
    /// shifted bin leaves `0..n_bins`.
    pub fn with_shifts(&self, shifts: &[i64], n_bins: usize) -> Option<NoteStateGraph> {
        let mut g = self.clone();
        for (b, s) in g.pitch_bins.iter_mut().zip(shifts) {
            *b += s;
            if !(0..n_bins as i64).contains(b) {
                return None;
            }
        }
        Some(g)
    }
}

/// Per-frame probabilities over `J` bins plus a trailing silence column.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    probs: DenseMatrix,
    /// Frame spacing in seconds.
    pub spacing: f64,
    /// Index of the first row on the global frame grid.
    pub start_frame: usize,
}

impl ObservationMatrix {
    /// Wraps a row-stochastic matrix (rows sum to 1 within 1e-6).
    pub fn new(probs: DenseMatrix, spacing: f64, start_frame: usize) -> Result<Self> {
        if probs.cols() < 2 {
            return Err(Error::shape("observations need at least one bin and a silence column"));
        }
        if !(spacing > 0.0) {
            return Err(Error::param("frame spacing must be positive"));
        }
        for (t, row) in probs.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::param(format!("observation frame {t} is not a distribution")));
            }
        }
        Ok(ObservationMatrix {
            probs,
            spacing,
            start_frame,
        })
    }

    pub fn frames(&self) -> usize {
        self.probs.rows()
    }

    /// Number of non-silence bins.
    pub fn bins(&self) -> usize {
        self.probs.cols() - 1
    }

    pub fn get(&self, t: usize, b: usize) -> f64 {
        self.probs.get(t, b)
    }

    pub fn silence(&self, t: usize) -> f64 {
        self.probs.get(t, self.bins())
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.probs
    }

    /// Start time of local frame `t`.
    pub fn time(&self, t: usize) -> f64 {
        self.spacing * (self.start_frame + t) as f64
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> ObservationMatrix {
        ObservationMatrix {
            start_frame: self.start_frame + range.start,
            probs: self.probs.slice_rows(range),
            spacing: self.spacing,
        }
    }
}

/// Appends the silence likelihood `1 - max_b s(t, b)` to each salience
/// frame and applies a per-frame softmax.
pub fn build_observation(salience: &DenseMatrix, spacing: f64) -> Result<ObservationMatrix> {
    if salience.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param("salience must lie in [0, 1]"));
    }
    let j = salience.cols();
    let mut out = DenseMatrix::zeros(salience.rows(), j + 1);
    for t in 0..salience.rows() {
        let row = salience.row(t);
        let dst = out.row_mut(t);
        dst[..j].copy_from_slice(row);
        dst[j] = 1.0 - row.iter().copied().fold(0.0, f64::max);
        crate::annotations::softmax_in_place(dst);
    }
    ObservationMatrix::new(out, spacing, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::Granularity;

    fn notes(freqs: &[f64]) -> GranularityLevel {
        GranularityLevel::new(
            Granularity::Notes,
            freqs
                .iter()
                .enumerate()
                .map(|(k, &f)| AlignedSegment::note(k as f64, k as f64 + 0.5, f, "la"))
                .collect(),
        )
    }

    #[test]
    fn interleaving() {
        let c = CqtConfig::default();
        let g = build_graph(&notes(&[c.center(10), c.center(12)]), StateMode::Pitch, false, &c).unwrap();
        assert_eq!(g.states(), vec![State::Blank, State::Note(0), State::Blank, State::Note(1), State::Blank]);
        assert_eq!(g.pitch_symbol(0), 10);
    }

    #[test]
    fn equal_pitches_stay_distinct() {
        let c = CqtConfig::default();
        let g = build_graph(&notes(&[220.0, 220.0]), StateMode::Pitch, false, &c).unwrap();
        assert_eq!(g.n_states(), 5);
        assert_eq!(g.pitch_symbol(0), g.pitch_symbol(1));
    }

    #[test]
    fn octave_fold() {
        let c = CqtConfig::default();
        let g = build_graph(&notes(&[130.81, 261.63]), StateMode::Pitch, true, &c).unwrap();
        assert_eq!(g.pitch_symbol(0), g.pitch_symbol(1));
        assert_eq!(g.n_notes(), 2);
    }

    #[test]
    fn unquantizable_note_is_named() {
        let c = CqtConfig::default();
        let err = build_graph(&notes(&[220.0, 5.0]), StateMode::Pitch, false, &c).unwrap_err();
        assert!(err.to_string().contains("note 1"));
        let mut bad = notes(&[220.0]);
        bad.segments[0].text = "--".into();
        let err = build_graph(&bad, StateMode::Text, false, &c).unwrap_err();
        assert!(err.to_string().contains("note 0"));
    }

    #[test]
    fn observation_silence_column() {
        let sal = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.2, 0.9, 0.4]]).unwrap();
        let obs = build_observation(&sal, 0.01).unwrap();
        // full-salience frame: silence logit 0 equals the other zero bins
        assert!((obs.silence(0) - obs.get(0, 1)).abs() < 1e-15);
        // silent frame: silence is the argmax
        assert_eq!(obs.matrix().row_argmax(1), 3);
        for t in 0..3 {
            let s: f64 = obs.matrix().row(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let e = [0.2f64.exp(), 0.9f64.exp(), 0.4f64.exp(), 0.1f64.exp()];
        let z: f64 = e.iter().sum();
        assert!((obs.silence(2) - e[3] / z).abs() < 1e-12);
    }
}
