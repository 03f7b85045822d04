//! Hierarchical time-aligned annotations.
//!
//! A song is described at four granularities (notes, words, lines,
//! paragraphs). Each level is an ordered, non-overlapping list of
//! [`AlignedSegment`]s, and every segment below paragraphs may link to its
//! parent one level up through `parent_index`.

mod json;
mod labels;
mod merge;
mod raster;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use labels::{boundary_labels, transpose_frequency};
pub use merge::{
    merge_paragraphs, merge_score, partition_by_merge, MergeClass, MergedParagraphs,
};
pub use raster::{
    frame_span, note_matrix, phoneme_index, phoneme_matrix, rasterize_vas,
    softmax_phoneme_prep, NoteMatrix, PHONEMES,
};
pub(crate) use raster::softmax_in_place;

/// One annotated event: `(t0, t1, f, text, parent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSegment {
    pub t0: f64,
    pub t1: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub text: String,
    pub phonemes: Option<Vec<String>>,
    pub parent_index: Option<usize>,
}

impl AlignedSegment {
    /// A note: a single frequency over `[t0, t1)`.
    pub fn note(t0: f64, t1: f64, freq: f64, text: impl Into<String>) -> Self {
        AlignedSegment {
            t0,
            t1,
            f_min: freq,
            f_max: freq,
            text: text.into(),
            phonemes: None,
            parent_index: None,
        }
    }

    /// A segment without pitch information (words, lines, paragraphs).
    pub fn span(t0: f64, t1: f64, text: impl Into<String>) -> Self {
        AlignedSegment {
            t0,
            t1,
            f_min: 0.0,
            f_max: 0.0,
            text: text.into(),
            phonemes: None,
            parent_index: None,
        }
    }

    pub fn with_parent(mut self, parent: usize) -> Self {
        self.parent_index = Some(parent);
        self
    }

    pub fn with_phonemes<S: Into<String>>(mut self, phonemes: impl IntoIterator<Item = S>) -> Self {
        self.phonemes = Some(phonemes.into_iter().map(Into::into).collect());
        self
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Nominal frequency of a note.
    pub fn freq(&self) -> f64 {
        self.f_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Notes,
    Words,
    Lines,
    Paragraphs,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Notes,
        Granularity::Words,
        Granularity::Lines,
        Granularity::Paragraphs,
    ];

    /// The next coarser level, if any.
    pub fn parent(self) -> Option<Granularity> {
        match self {
            Granularity::Notes => Some(Granularity::Words),
            Granularity::Words => Some(Granularity::Lines),
            Granularity::Lines => Some(Granularity::Paragraphs),
            Granularity::Paragraphs => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Notes => "notes",
            Granularity::Words => "words",
            Granularity::Lines => "lines",
            Granularity::Paragraphs => "paragraphs",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "notes" | "note" => Ok(Granularity::Notes),
            "words" | "word" => Ok(Granularity::Words),
            "lines" | "line" => Ok(Granularity::Lines),
            "paragraphs" | "paragraph" => Ok(Granularity::Paragraphs),
            other => Err(Error::param(format!("unknown granularity '{other}'"))),
        }
    }
}

/// All segments of one granularity, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct GranularityLevel {
    pub level: Granularity,
    pub segments: Vec<AlignedSegment>,
}

impl GranularityLevel {
    pub fn new(level: Granularity, segments: Vec<AlignedSegment>) -> Self {
        GranularityLevel { level, segments }
    }

    pub fn empty(level: Granularity) -> Self {
        GranularityLevel::new(level, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// End time of the last segment, or 0 for an empty level.
    pub fn end_time(&self) -> f64 {
        self.segments.iter().map(|s| s.t1).fold(0.0, f64::max)
    }

    /// Applies `f` to every segment time, returning a new level.
    pub fn map_times(&self, mut f: impl FnMut(f64) -> f64) -> GranularityLevel {
        let segments = self
            .segments
            .iter()
            .map(|s| AlignedSegment {
                t0: f(s.t0),
                t1: f(s.t1),
                ..s.clone()
            })
            .collect();
        GranularityLevel::new(self.level, segments)
    }
}

/// The full annotation set of one song plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SongAnnotations {
    pub notes: GranularityLevel,
    pub words: GranularityLevel,
    pub lines: GranularityLevel,
    pub paragraphs: GranularityLevel,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Default for SongAnnotations {
    fn default() -> Self {
        SongAnnotations {
            notes: GranularityLevel::empty(Granularity::Notes),
            words: GranularityLevel::empty(Granularity::Words),
            lines: GranularityLevel::empty(Granularity::Lines),
            paragraphs: GranularityLevel::empty(Granularity::Paragraphs),
            metadata: BTreeMap::new(),
        }
    }
}

impl SongAnnotations {
    pub fn level(&self, g: Granularity) -> &GranularityLevel {
        match g {
            Granularity::Notes => &self.notes,
            Granularity::Words => &self.words,
            Granularity::Lines => &self.lines,
            Granularity::Paragraphs => &self.paragraphs,
        }
    }

    pub fn level_mut(&mut self, g: Granularity) -> &mut GranularityLevel {
        match g {
            Granularity::Notes => &mut self.notes,
            Granularity::Words => &mut self.words,
            Granularity::Lines => &mut self.lines,
            Granularity::Paragraphs => &mut self.paragraphs,
        }
    }

    /// Follows parent links from segment `index` of `from` up to level `to`.
    ///
    /// Returns `None` if a link is missing or dangling.
    pub fn ancestor(&self, from: Granularity, index: usize, to: Granularity) -> Option<usize> {
        let mut level = from;
        let mut idx = index;
        while level != to {
            let seg = self.level(level).segments.get(idx)?;
            let parent = level.parent()?;
            idx = seg.parent_index?;
            if idx >= self.level(parent).len() {
                return None;
            }
            level = parent;
        }
        Some(idx)
    }

    /// Indices of the segments of `from` whose ancestor at `to` is `target`.
    pub fn descendants(&self, to: Granularity, target: usize, from: Granularity) -> Vec<usize> {
        (0..self.level(from).len())
            .filter(|&i| self.ancestor(from, i, to) == Some(target))
            .collect()
    }

    /// Applies a time map to every level.
    pub fn map_times(&self, mut f: impl FnMut(f64) -> f64) -> SongAnnotations {
        SongAnnotations {
            notes: self.notes.map_times(&mut f),
            words: self.words.map_times(&mut f),
            lines: self.lines.map_times(&mut f),
            paragraphs: self.paragraphs.map_times(&mut f),
            metadata: self.metadata.clone(),
        }
    }

    pub fn metadata_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(serde_json::Value::as_f64)
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub level: Granularity,
    pub index: usize,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]: {}", self.level, self.index, self.rule)
    }
}

/// Checks every structural invariant of the annotation model.
///
/// Never fails; an empty list means the song is well formed.
pub fn validate(song: &SongAnnotations) -> Vec<Violation> {
    let mut out = Vec::new();
    for g in Granularity::ALL {
        let level = song.level(g);
        let parent_len = g.parent().map(|p| song.level(p).len()).unwrap_or(0);
        let mut push = |index: usize, rule: &str| {
            out.push(Violation {
                level: g,
                index,
                rule: rule.to_string(),
            })
        };
        for (k, seg) in level.segments.iter().enumerate() {
            if ![seg.t0, seg.t1, seg.f_min, seg.f_max].iter().all(|v| v.is_finite()) {
                push(k, "finite values");
                continue;
            }
            if !(seg.t0 < seg.t1) {
                push(k, "t0<t1");
            }
            if seg.f_min > seg.f_max {
                push(k, "f_min<=f_max");
            }
            if g == Granularity::Notes && seg.f_min != seg.f_max {
                push(k, "note f_min=f_max");
            }
            match (seg.parent_index, g.parent()) {
                (Some(p), Some(_)) if p >= parent_len => push(k, "parent_index refers to an existing segment"),
                (Some(_), None) => push(k, "paragraphs have no parent level"),
                (None, Some(_)) if parent_len > 0 => push(k, "parent_index required"),
                _ => {}
            }
            if let Some(next) = level.segments.get(k + 1) {
                if seg.t1 > next.t0 {
                    push(k, "ordered and non-overlapping (t1 <= next t0)");
                }
            }
        }
    }
    out
}

/// Converts a karaoke frame index to seconds: `o + index / fr`.
pub fn raw_to_seconds(frame_index: i64, offset_o: f64, frame_rate_fr: f64) -> Result<f64> {
    if !(frame_rate_fr > 0.0) || !frame_rate_fr.is_finite() {
        return Err(Error::param(format!(
            "frame rate must be positive, got {frame_rate_fr}"
        )));
    }
    Ok(offset_o + frame_index as f64 / frame_rate_fr)
}

/// Evenly spaced frame grid: frame `i` sits at `r_i = spacing * i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub spacing: f64,
    pub n_frames: usize,
}

impl TimeGrid {
    pub fn new(spacing: f64, n_frames: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::param(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(TimeGrid { spacing, n_frames })
    }

    /// Smallest grid whose frames cover `[0, duration]`.
    pub fn covering(spacing: f64, duration: f64) -> Result<Self> {
        let n = (duration.max(0.0) / spacing).ceil() as usize + 1;
        TimeGrid::new(spacing, n)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.spacing * i as f64
    }

    pub fn duration(&self) -> f64 {
        self.spacing * self.n_frames as f64
    }
}

/// One value per grid frame (voice activity, probabilities, energies).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl FrameSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_frames {
            return Err(Error::shape(format!(
                "series has {} values but grid has {} frames",
                values.len(),
                grid.n_frames
            )));
        }
        Ok(FrameSeries { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        FrameSeries {
            grid,
            values: vec![0.0; grid.n_frames],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_note_song() -> SongAnnotations {
        SongAnnotations {
            notes: GranularityLevel::new(
                Granularity::Notes,
                vec![
                    AlignedSegment::note(0.0, 0.5, 440.0, "la"),
                    AlignedSegment::note(0.6, 1.0, 220.0, "la"),
                ],
            ),
            ..Default::default()
        }
    }

    #[test]
    fn well_formed_song_has_no_violations() {
        assert!(validate(&two_note_song()).is_empty());
    }

    #[test]
    fn inverted_note_is_reported() {
        let mut song = two_note_song();
        song.notes.segments[0] = AlignedSegment::note(1.0, 0.5, 440.0, "x");
        song.notes.segments[1] = AlignedSegment::note(1.2, 1.5, 440.0, "y");
        let v = validate(&song);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, "t0<t1");
        assert_eq!(v[0].index, 0);
    }

    #[test]
    fn overlapping_lines_are_reported() {
        let song = SongAnnotations {
            lines: GranularityLevel::new(
                Granularity::Lines,
                vec![AlignedSegment::span(0.0, 2.0, "a"), AlignedSegment::span(1.0, 3.0, "b")],
            ),
            ..Default::default()
        };
        let v = validate(&song);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].level, Granularity::Lines);
        assert!(v[0].rule.contains("non-overlapping"));
    }

    #[test]
    fn dangling_parent_is_reported() {
        let mut song = two_note_song();
        song.words = GranularityLevel::new(Granularity::Words, vec![AlignedSegment::span(0.0, 1.0, "lala")]);
        song.notes.segments[0].parent_index = Some(0);
        song.notes.segments[1].parent_index = Some(3);
        let v = validate(&song);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 1);
    }

    #[test]
    fn raw_frames_to_seconds() {
        assert_eq!(raw_to_seconds(100, 1.0, 50.0).unwrap(), 3.0);
        assert_eq!(raw_to_seconds(0, 2.5, 43.0).unwrap(), 2.5);
        assert_eq!(raw_to_seconds(6, 0.25, 4.0).unwrap(), 1.75);
        assert!(raw_to_seconds(1, 0.0, 0.0).is_err());
        assert!(raw_to_seconds(1, 0.0, -3.0).is_err());
    }

    #[test]
    fn ancestor_chain() {
        let song = SongAnnotations {
            notes: GranularityLevel::new(
                Granularity::Notes,
                vec![
                    AlignedSegment::note(0.0, 0.5, 440.0, "a").with_parent(0),
                    AlignedSegment::note(0.5, 1.0, 440.0, "b").with_parent(1),
                ],
            ),
            words: GranularityLevel::new(
                Granularity::Words,
                vec![
                    AlignedSegment::span(0.0, 0.5, "a").with_parent(0),
                    AlignedSegment::span(0.5, 1.0, "b").with_parent(1),
                ],
            ),
            lines: GranularityLevel::new(
                Granularity::Lines,
                vec![
                    AlignedSegment::span(0.0, 0.5, "a").with_parent(0),
                    AlignedSegment::span(0.5, 1.0, "b").with_parent(0),
                ],
            ),
            paragraphs: GranularityLevel::new(
                Granularity::Paragraphs,
                vec![AlignedSegment::span(0.0, 1.0, "a b")],
            ),
            metadata: Default::default(),
        };
        assert!(validate(&song).is_empty());
        assert_eq!(song.ancestor(Granularity::Notes, 1, Granularity::Paragraphs), Some(0));
        assert_eq!(song.descendants(Granularity::Paragraphs, 0, Granularity::Notes), vec![0, 1]);
    }
}
