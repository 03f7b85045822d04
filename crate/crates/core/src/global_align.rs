//! Global alignment of annotations to a singing-voice probability stream.
//!
//! The annotation times are re-derived from raw karaoke frames for every
//! candidate frame rate, rasterized to a voice-activity sequence and
//! correlated with the probability stream over all offsets. The score is
//!
//! ```text
//! NCC(o, fr) = sum_t vas(t - o) * p(t) / (|vas| * |p|)
//! ```
//!
//! with both norms taken over the full sequences.

use std::ops::RangeInclusive;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::annotations::{
    frame_span, rasterize_vas, FrameSeries, Granularity, GranularityLevel, SongAnnotations, TimeGrid,
};
use crate::dsp::cqt::CqtConfig;
use crate::dsp::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Parameters of the offset / frame-rate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalAlignParams {
    /// Frame rate the annotation times were derived with.
    pub fr_nominal: f64,
    /// Half-width of the frame-rate search interval as a fraction of `fr_nominal`.
    pub alpha_fraction: f64,
    /// Uniform grid points over `[fr - alpha, fr + alpha]`.
    pub fr_grid_steps: usize,
    /// Acceptance threshold on the best score.
    pub t_corr: f64,
    /// Extra points spread over one coarse step on each side of the coarse
    /// optimum; 0 disables the refinement pass.
    pub refine_steps: usize,
}

impl GlobalAlignParams {
    pub fn new(fr_nominal: f64) -> Self {
        GlobalAlignParams {
            fr_nominal,
            alpha_fraction: 0.05,
            fr_grid_steps: 101,
            t_corr: 0.8,
            refine_steps: 21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fr_nominal > 0.0) {
            return Err(Error::param("nominal frame rate must be positive"));
        }
        if !(self.alpha_fraction > 0.0 && self.alpha_fraction < 1.0) {
            return Err(Error::param("alpha fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.t_corr) {
            return Err(Error::param("t_corr must lie in [0, 1]"));
        }
        if self.fr_grid_steps == 0 {
            return Err(Error::param("fr grid needs at least one point"));
        }
        Ok(())
    }

    /// Spacing of the coarse frame-rate grid.
    pub fn grid_step(&self) -> f64 {
        if self.fr_grid_steps < 2 {
            0.0
        } else {
            2.0 * self.alpha_fraction * self.fr_nominal / (self.fr_grid_steps - 1) as f64
        }
    }

    fn coarse_grid(&self) -> Vec<f64> {
        let alpha = self.alpha_fraction * self.fr_nominal;
        if self.fr_grid_steps == 1 {
            return vec![self.fr_nominal];
        }
        (0..self.fr_grid_steps)
            .map(|i| self.fr_nominal - alpha + self.grid_step() * i as f64)
            .collect()
    }
}

/// Best lag of one correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NccMatch {
    pub lag: i64,
    pub score: f64,
}

/// Outcome of the offset / frame-rate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NccResult {
    /// Offset in seconds (`lag * H`).
    pub best_offset: f64,
    pub best_fr: f64,
    pub best_lag: i64,
    pub score: f64,
    pub accepted: bool,
}

/// FFT cross-correlator against a fixed probability stream.
pub struct Correlator {
    phat: Vec<f64>,
    phat_norm: f64,
    fft_len: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Correlator {
    /// Prepares correlation of `phat` against sequences of up to `max_len` frames.
    pub fn new(phat: &[f64], max_len: usize) -> Result<Self> {
        let phat_norm = phat.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(phat_norm > 0.0) {
            return Err(Error::Degenerate("probability stream has zero norm".into()));
        }
        let fft_len = (phat.len() + max_len.max(1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex::new(0.0, 0.0); fft_len];
        for (s, &v) in spectrum.iter_mut().zip(phat) {
            s.re = v;
        }
        forward.process(&mut spectrum);
        Ok(Correlator {
            phat: phat.to_vec(),
            phat_norm,
            fft_len,
            spectrum,
            forward,
            inverse,
        })
    }

    /// Exact `sum_t vas(t - lag) * p(t)`.
    pub fn direct(&self, vas: &[f64], lag: i64) -> f64 {
        let lo = lag.max(0);
        let hi = (vas.len() as i64 + lag).min(self.phat.len() as i64);
        (lo..hi)
            .map(|t| vas[(t - lag) as usize] * self.phat[t as usize])
            .sum()
    }

    /// Best lag in `lags`: highest normalized correlation, ties to the
    /// smallest `|lag|` (then the smaller lag). The returned score is
    /// recomputed directly at the chosen lag.
    pub fn best(&self, vas: &[f64], lags: RangeInclusive<i64>) -> Result<NccMatch> {
        let vas_norm = vas.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(vas_norm > 0.0) {
            return Err(Error::Degenerate("voice activity sequence has zero norm".into()));
        }
        if vas.len() + self.phat.len() > self.fft_len {
            return Err(Error::param("sequence longer than the correlator was prepared for"));
        }
        let (req_lo, req_hi) = (*lags.start(), *lags.end());
        if req_lo > req_hi {
            return Err(Error::param("empty lag range"));
        }
        let tie_order = |l: i64| (l.unsigned_abs(), l);
        let valid_lo = 1 - vas.len() as i64;
        let valid_hi = self.phat.len() as i64 - 1;
        let lo = req_lo.max(valid_lo);
        let hi = req_hi.min(valid_hi);
        if lo > hi {
            // no overlap anywhere in range: every score is zero
            let lag = (req_lo..=req_hi).min_by_key(|&l| tie_order(l)).unwrap_or(req_lo);
            return Ok(NccMatch { lag, score: 0.0 });
        }

        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (b, &v) in buf.iter_mut().zip(vas) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b = b.conj() * s;
        }
        self.inverse.process(&mut buf);
        let n = self.fft_len as f64;
        let at = |lag: i64| -> f64 {
            let idx = if lag >= 0 { lag as usize } else { (self.fft_len as i64 + lag) as usize };
            buf[idx].re / n
        };
        let max = (lo..=hi).map(at).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * vas_norm * self.phat_norm;
        let mut lag = (lo..=hi)
            .filter(|&l| at(l) >= max - tol)
            .min_by_key(|&l| tie_order(l))
            .expect("non-empty lag range");
        // zero-overlap lags outside the valid range can win a tie on |lag|
        if max <= tol {
            lag = (req_lo..=req_hi).min_by_key(|&l| tie_order(l)).unwrap_or(lag);
        }
        let score = if (valid_lo..=valid_hi).contains(&lag) {
            self.direct(vas, lag) / (vas_norm * self.phat_norm)
        } else {
            0.0
        };
        Ok(NccMatch {
            lag,
            score: score.clamp(0.0, 1.0),
        })
    }
}

fn same_grid(a: &TimeGrid, b: &TimeGrid) -> bool {
    (a.spacing - b.spacing).abs() <= 1e-12 * a.spacing.abs().max(b.spacing.abs())
}

/// Normalized cross-correlation of `vas` against `phat` over `lags`.
pub fn ncc(vas: &FrameSeries, phat: &FrameSeries, lags: RangeInclusive<i64>) -> Result<NccMatch> {
    if !same_grid(&vas.grid, &phat.grid) {
        return Err(Error::param("vas and phat are on different grids"));
    }
    Correlator::new(&phat.values, vas.len())?.best(&vas.values, lags)
}

/// Every lag at which the two sequences overlap.
pub fn full_lag_range(vas_len: usize, phat_len: usize) -> RangeInclusive<i64> {
    (1 - vas_len as i64)..=(phat_len as i64 - 1)
}

/// Annotation times expressed in raw karaoke frames.
fn raw_frames(notes: &GranularityLevel, annotation_offset: f64, fr_nominal: f64) -> Vec<(f64, f64)> {
    notes
        .segments
        .iter()
        .map(|s| ((s.t0 - annotation_offset) * fr_nominal, (s.t1 - annotation_offset) * fr_nominal))
        .collect()
}

/// Voice activity of raw-frame notes placed at `raw / fr` seconds.
fn vas_for_rate(raw: &[(f64, f64)], fr: f64, spacing: f64) -> Vec<f64> {
    let end = raw.iter().map(|r| r.1).fold(0.0, f64::max) / fr;
    let grid = TimeGrid {
        spacing,
        n_frames: (end / spacing).ceil().max(0.0) as usize + 1,
    };
    let mut v = vec![0.0; grid.n_frames];
    for &(a, b) in raw {
        for i in frame_span(a / fr, b / fr, &grid, false) {
            v[i] = 1.0;
        }
    }
    v
}

/// Searches frame rate and offset that best align `notes` with `phat`.
///
/// `annotation_offset` is the offset the annotation times currently
/// include; raw frames are recovered as `(t - annotation_offset) * fr_nominal`.
pub fn align_global(
    notes: &GranularityLevel,
    annotation_offset: f64,
    phat: &FrameSeries,
    params: &GlobalAlignParams,
) -> Result<NccResult> {
    params.validate()?;
    if notes.is_empty() {
        return Err(Error::Degenerate("no notes to align".into()));
    }
    let h = phat.grid.spacing;
    let raw = raw_frames(notes, annotation_offset, params.fr_nominal);
    let coarse = params.coarse_grid();
    let slowest = coarse.iter().copied().fold(f64::INFINITY, f64::min)
        * (1.0 - params.grid_step() / params.fr_nominal).max(0.5);
    let max_len = vas_for_rate(&raw, slowest, h).len();
    let corr = Correlator::new(&phat.values, max_len)?;

    let evaluate = |frs: &[f64]| -> Result<Vec<(f64, NccMatch)>> {
        frs.par_iter()
            .map(|&fr| {
                let vas = vas_for_rate(&raw, fr, h);
                corr.best(&vas, full_lag_range(vas.len(), phat.len())).map(|m| (fr, m))
            })
            .collect()
    };
    let pick = |cands: &[(f64, NccMatch)]| -> (f64, NccMatch) {
        let mut best = cands[0];
        for &c in &cands[1..] {
            let better = c.1.score > best.1.score + 1e-12
                || ((c.1.score - best.1.score).abs() <= 1e-12
                    && (c.0 - params.fr_nominal).abs() < (best.0 - params.fr_nominal).abs());
            if better {
                best = c;
            }
        }
        best
    };

    let mut all = evaluate(&coarse)?;
    let (mut fr, mut m) = pick(&all);
    if params.refine_steps > 0 && params.fr_grid_steps > 1 {
        let step = params.grid_step();
        let k = params.refine_steps;
        let fine: Vec<f64> = (0..k)
            .map(|i| fr - step + 2.0 * step * (i + 1) as f64 / (k + 1) as f64)
            .collect();
        all.extend(evaluate(&fine)?);
        (fr, m) = pick(&all);
    }
    Ok(NccResult {
        best_offset: m.lag as f64 * h,
        best_fr: fr,
        best_lag: m.lag,
        score: m.score,
        accepted: m.score >= params.t_corr,
    })
}

/// Re-times every level of `song` with the found offset and frame rate.
pub fn apply_global(
    song: &SongAnnotations,
    annotation_offset: f64,
    fr_nominal: f64,
    result: &NccResult,
) -> SongAnnotations {
    let mut out = song.map_times(|t| result.best_offset + (t - annotation_offset) * fr_nominal / result.best_fr);
    out.metadata.insert("offset".into(), result.best_offset.into());
    out.metadata.insert("fr".into(), result.best_fr.into());
    out.metadata.insert("ncc".into(), result.score.into());
    out
}

/// Scores of all candidate audio tracks and the chosen one.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateSelection {
    /// Highest-scoring candidate, if it reaches `t_corr`. Ties go to the lower index.
    pub index: Option<usize>,
    pub results: Vec<NccResult>,
}

/// Aligns against every candidate and keeps the best accepted one.
/// Candidates with an all-zero stream score 0.
pub fn select_candidate(
    notes: &GranularityLevel,
    annotation_offset: f64,
    candidates: &[FrameSeries],
    params: &GlobalAlignParams,
) -> Result<CandidateSelection> {
    params.validate()?;
    let results = candidates
        .par_iter()
        .map(|c| match align_global(notes, annotation_offset, c, params) {
            Ok(r) => Ok(r),
            Err(e) if e.is_degenerate() => Ok(NccResult {
                best_offset: 0.0,
                best_fr: params.fr_nominal,
                best_lag: 0,
                score: 0.0,
                accepted: false,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSelection {
        index: choose_candidate(&results.iter().map(|r| r.score).collect::<Vec<_>>(), params.t_corr),
        results,
    })
}

/// Index of the maximum score (lowest index on ties) if it reaches `t_corr`.
pub fn choose_candidate(scores: &[f64], t_corr: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best.filter(|&b| scores[b] >= t_corr)
}

/// Search window around each paragraph, seconds.
pub const PARAGRAPH_WINDOW_S: f64 = 5.0;

/// Offset found for one paragraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParagraphCorrection {
    pub paragraph: usize,
    pub offset: f64,
    pub score: f64,
    pub applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Per-paragraph NCC of each paragraph's notes against `phat` within
/// `window_s` seconds on either side of the paragraph.
///
/// A correction is only applied if the moved paragraph stays after the
/// previous one and before the next one.
pub fn align_paragraph_local(
    song: &SongAnnotations,
    phat: &FrameSeries,
    window_s: f64,
) -> Result<Vec<ParagraphCorrection>> {
    if song.paragraphs.is_empty() {
        return Err(Error::schema("paragraph-local alignment needs paragraphs"));
    }
    let grid = phat.grid;
    let h = grid.spacing;
    let max_lag = (window_s / h).round() as i64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); song.paragraphs.len()];
    for k in 0..song.notes.len() {
        if let Some(p) = song.ancestor(Granularity::Notes, k, Granularity::Paragraphs) {
            members[p].push(k);
        }
    }
    let paras = &song.paragraphs.segments;
    let mut out = Vec::with_capacity(paras.len());
    let mut prev_end = f64::NEG_INFINITY;
    for (p, para) in paras.iter().enumerate() {
        let skip = |reason: &str| ParagraphCorrection {
            paragraph: p,
            offset: 0.0,
            score: 0.0,
            applied: false,
            reason: Some(reason.to_string()),
        };
        if members[p].is_empty() {
            log::warn!("paragraph {p} has no notes; skipped");
            out.push(skip("no notes"));
            prev_end = para.t1;
            continue;
        }
        let notes = GranularityLevel::new(
            Granularity::Notes,
            members[p].iter().map(|&k| song.notes.segments[k].clone()).collect(),
        );
        let lo_t = notes.segments.iter().map(|s| s.t0).fold(para.t0, f64::min);
        let hi_t = notes.segments.iter().map(|s| s.t1).fold(para.t1, f64::max);
        let window = frame_span(lo_t - window_s, hi_t + window_s, &grid, true);
        let (w0, w1) = (window.start, window.end);
        let vas = rasterize_vas(&notes, &grid);
        let vas_w = &vas.values[w0..w1];
        let phat_w = &phat.values[w0..w1];
        let found = Correlator::new(phat_w, vas_w.len()).and_then(|c| c.best(vas_w, -max_lag..=max_lag));
        let m = match found {
            Ok(m) => m,
            Err(e) if e.is_degenerate() => {
                log::warn!("paragraph {p}: {e}; skipped");
                out.push(skip("degenerate window"));
                prev_end = para.t1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let offset = m.lag as f64 * h;
        let next_start = paras.get(p + 1).map_or(f64::INFINITY, |n| n.t0);
        let (new_t0, new_t1) = (para.t0 + offset, para.t1 + offset);
        let ordered = new_t0 >= prev_end && new_t1 <= next_start && new_t0 >= 0.0;
        prev_end = if ordered { new_t1 } else { para.t1 };
        out.push(ParagraphCorrection {
            paragraph: p,
            offset,
            score: m.score,
            applied: ordered,
            reason: (!ordered).then(|| "correction would break paragraph ordering".to_string()),
        });
    }
    Ok(out)
}

/// Shifts every segment of each corrected paragraph by its offset.
pub fn apply_paragraph_corrections(song: &SongAnnotations, corrections: &[ParagraphCorrection]) -> SongAnnotations {
    let mut out = song.clone();
    let shift_of: Vec<f64> = {
        let mut v = vec![0.0; song.paragraphs.len()];
        for c in corrections.iter().filter(|c| c.applied) {
            v[c.paragraph] = c.offset;
        }
        v
    };
    for g in Granularity::ALL {
        for k in 0..song.level(g).len() {
            if let Some(p) = song.ancestor(g, k, Granularity::Paragraphs) {
                let seg = &mut out.level_mut(g).segments[k];
                seg.t0 += shift_of[p];
                seg.t1 += shift_of[p];
            }
        }
    }
    out
}

/// Score of one transposition candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftScore {
    pub shift: i64,
    /// Sum of salience at the shifted annotated bins over annotated frames.
    pub energy: f64,
    pub raw_pitch_accuracy: f64,
    pub raw_chroma_accuracy: f64,
    pub overall_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyCorrelation {
    pub best_shift: i64,
    pub energy: f64,
    pub voicing_recall: f64,
    pub voicing_false_alarm: f64,
    pub per_shift: Vec<ShiftScore>,
}

/// Finds the semitone transposition of `notes` that maximizes the salience
/// energy under the annotated pitches. Ties go to the smallest `|shift|`.
///
/// `salience` is `T x J` on `grid`, with columns on the `ladder` bins. A
/// frame counts as voiced in the salience when its maximum reaches
/// `voicing_threshold`.
pub fn frequency_correlation(
    notes: &GranularityLevel,
    salience: &DenseMatrix,
    grid: &TimeGrid,
    ladder: &CqtConfig,
    voicing_threshold: f64,
) -> Result<FrequencyCorrelation> {
    if salience.rows() != grid.n_frames {
        return Err(Error::shape(format!(
            "salience has {} frames, grid has {}",
            salience.rows(),
            grid.n_frames
        )));
    }
    let j = salience.cols() as i64;
    let p = ladder.bins_per_octave as i64;
    let mut annotated: Vec<Option<i64>> = vec![None; grid.n_frames];
    for (k, note) in notes.segments.iter().enumerate() {
        let bin = ladder
            .nearest_bin(note.freq())
            .ok_or_else(|| Error::param(format!("note {k} has no valid frequency")))?;
        for i in frame_span(note.t0, note.t1, grid, false) {
            annotated[i] = Some(bin);
        }
    }
    let voiced: Vec<bool> = salience
        .row_iter()
        .map(|r| r.iter().copied().fold(0.0, f64::max) >= voicing_threshold && !r.is_empty())
        .collect();
    let argmax: Vec<i64> = (0..salience.rows()).map(|i| salience.row_argmax(i) as i64).collect();
    let n_annot = annotated.iter().filter(|a| a.is_some()).count();
    let n_unannot = grid.n_frames - n_annot;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let voiced_annot = (0..grid.n_frames).filter(|&i| annotated[i].is_some() && voiced[i]).count();
    let voiced_unannot = (0..grid.n_frames).filter(|&i| annotated[i].is_none() && voiced[i]).count();
    let unvoiced_unannot = n_unannot - voiced_unannot;

    let per_shift: Vec<ShiftScore> = ((1 - j)..=(j - 1))
        .map(|s| {
            let mut energy = 0.0;
            let (mut pitch_ok, mut chroma_ok) = (0usize, 0usize);
            for (i, a) in annotated.iter().enumerate() {
                let Some(b) = a else { continue };
                let target = b + s;
                if (0..j).contains(&target) {
                    energy += salience.get(i, target as usize);
                }
                if voiced[i] {
                    if argmax[i] == target {
                        pitch_ok += 1;
                    }
                    if (argmax[i] - target).rem_euclid(p) == 0 {
                        chroma_ok += 1;
                    }
                }
            }
            ShiftScore {
                shift: s,
                energy,
                raw_pitch_accuracy: ratio(pitch_ok, n_annot),
                raw_chroma_accuracy: ratio(chroma_ok, n_annot),
                overall_accuracy: ratio(pitch_ok + unvoiced_unannot, grid.n_frames),
            }
        })
        .collect();
    let mut best = per_shift.iter().find(|s| s.shift == 0).copied().unwrap_or(per_shift[0]);
    for s in &per_shift {
        let tol = 1e-12 * best.energy.abs().max(1.0);
        let better = s.energy > best.energy + tol
            || ((s.energy - best.energy).abs() <= tol && (s.shift.abs(), s.shift) < (best.shift.abs(), best.shift));
        if better {
            best = *s;
        }
    }
    Ok(FrequencyCorrelation {
        best_shift: best.shift,
        energy: best.energy,
        voicing_recall: ratio(voiced_annot, n_annot),
        voicing_false_alarm: ratio(voiced_unannot, n_unannot),
        per_shift,
    })
}

/// Tracks whose mean probability is within `tolerance` of the maximum mean.
pub fn detect_vocal_tracks(track_means: &[f64], tolerance: f64) -> Vec<usize> {
    let max = track_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    track_means
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= (1.0 - tolerance) * max)
        .map(|(i, _)| i)
        .collect()
}
