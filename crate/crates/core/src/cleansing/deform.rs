use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::DenseMatrix;

/// A contiguous run of active frames in one bin of a `bins x frames` patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteBlock {
    pub bin: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

impl NoteBlock {
    fn overlaps(&self, other: &NoteBlock) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Note blocks of a `bins x frames` label patch, ordered by start frame then bin.
pub fn note_blocks(patch: &DenseMatrix) -> Vec<NoteBlock> {
    let mut out = Vec::new();
    for bin in 0..patch.rows() {
        let row = patch.row(bin);
        let mut f = 0;
        while f < row.len() {
            if row[f] != 0.0 {
                let start = f;
                while f < row.len() && row[f] != 0.0 {
                    f += 1;
                }
                out.push(NoteBlock { bin, start, end: f });
            } else {
                f += 1;
            }
        }
    }
    out.sort_by_key(|b| (b.start, b.bin));
    out
}

fn render(blocks: &[NoteBlock], bins: usize, frames: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(bins, frames);
    for b in blocks {
        for f in b.start..b.end {
            m.set(b.bin, f, 1.0);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformOp {
    ShiftOnset,
    ShiftOffset,
    Transpose,
    DeleteNote,
    InsertNote,
}

/// A concrete deformation; `note` indexes [`note_blocks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AppliedOp {
    ShiftOnset { note: usize, frames: i64 },
    ShiftOffset { note: usize, frames: i64 },
    Transpose { note: usize, semitones: i64 },
    DeleteNote { note: usize },
    InsertNote { bin: usize, start: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformationSpec {
    pub ops: Vec<DeformOp>,
    /// Inclusive range of onset/offset shifts in frames.
    pub shift_frames: (usize, usize),
    /// Candidate transpositions in semitones.
    pub intervals: Vec<i64>,
    /// Inclusive length range of inserted notes in frames.
    pub insert_frames: (usize, usize),
    pub max_retries: usize,
}

impl Default for DeformationSpec {
    fn default() -> Self {
        DeformationSpec {
            ops: vec![
                DeformOp::ShiftOnset,
                DeformOp::ShiftOffset,
                DeformOp::Transpose,
                DeformOp::DeleteNote,
                DeformOp::InsertNote,
            ],
            shift_frames: (3, 15),
            intervals: vec![1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 7, -7, 12, -12],
            insert_frames: (5, 30),
            max_retries: 20,
        }
    }
}

/// Applies `op` to a `bins x frames` patch. `None` if the result would
/// leave the patch, have an empty note, or overlap another note in time.
pub fn apply_deformation(patch: &DenseMatrix, op: AppliedOp) -> Option<DenseMatrix> {
    let (bins, frames) = patch.shape();
    let mut blocks = note_blocks(patch);
    let changed = match op {
        AppliedOp::ShiftOnset { note, frames: d } => {
            let b = blocks.get_mut(note)?;
            b.start = usize::try_from(b.start as i64 + d).ok()?;
            Some(note)
        }
        AppliedOp::ShiftOffset { note, frames: d } => {
            let b = blocks.get_mut(note)?;
            b.end = usize::try_from(b.end as i64 + d).ok()?;
            Some(note)
        }
        AppliedOp::Transpose { note, semitones } => {
            let b = blocks.get_mut(note)?;
            b.bin = usize::try_from(b.bin as i64 + semitones).ok()?;
            Some(note)
        }
        AppliedOp::DeleteNote { note } => {
            if note >= blocks.len() {
                return None;
            }
            blocks.remove(note);
            None
        }
        AppliedOp::InsertNote { bin, start, len } => {
            blocks.push(NoteBlock { bin, start, end: start + len });
            Some(blocks.len() - 1)
        }
    };
    if let Some(k) = changed {
        let b = blocks[k];
        if b.start >= b.end || b.end > frames || b.bin >= bins {
            return None;
        }
        if blocks.iter().enumerate().any(|(j, o)| j != k && o.overlaps(&b)) {
            return None;
        }
    }
    Some(render(&blocks, bins, frames))
}

fn signed<R: Rng>(rng: &mut R, (lo, hi): (usize, usize)) -> i64 {
    let m = rng.gen_range(lo.min(hi)..=hi.max(lo)) as i64;
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Draws a deformation that changes the patch's centre frame. The note
/// sounding at the centre is shifted, transposed or deleted; a patch
/// with a silent centre gets a new note across it. `None` after
/// `max_retries` failed draws.
pub fn deform<R: Rng>(patch: &DenseMatrix, spec: &DeformationSpec, rng: &mut R) -> Option<(DenseMatrix, AppliedOp)> {
    let (bins, frames) = patch.shape();
    if bins == 0 || frames == 0 {
        return None;
    }
    let c = frames / 2;
    let blocks = note_blocks(patch);
    let centre = blocks.iter().position(|b| b.start <= c && c < b.end);
    let note_ops: Vec<DeformOp> = spec.ops.iter().copied().filter(|&o| o != DeformOp::InsertNote).collect();
    let can_insert = spec.ops.contains(&DeformOp::InsertNote);
    for _ in 0..spec.max_retries.max(1) {
        let op = match centre {
            Some(note) => match note_ops.choose(rng)? {
                DeformOp::ShiftOnset => AppliedOp::ShiftOnset {
                    note,
                    frames: signed(rng, spec.shift_frames),
                },
                DeformOp::ShiftOffset => AppliedOp::ShiftOffset {
                    note,
                    frames: signed(rng, spec.shift_frames),
                },
                DeformOp::Transpose => AppliedOp::Transpose {
                    note,
                    semitones: *spec.intervals.choose(rng)?,
                },
                _ => AppliedOp::DeleteNote { note },
            },
            None if can_insert => {
                let (lo, hi) = spec.insert_frames;
                let len = rng.gen_range(lo.clamp(1, frames)..=hi.clamp(lo.clamp(1, frames), frames));
                let first = (c + 1).saturating_sub(len);
                let last = c.min(frames - len);
                AppliedOp::InsertNote {
                    bin: rng.gen_range(0..bins),
                    start: rng.gen_range(first..=last.max(first)),
                    len,
                }
            }
            None => return None,
        };
        if let Some(out) = apply_deformation(patch, op) {
            let differs = (0..bins).any(|b| out.get(b, c) != patch.get(b, c));
            if differs {
                return Some((out, op));
            }
        }
    }
    None
}
