use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{build_graph, StateMode};
use super::viterbi::{viterbi_align, Observations, ViterbiConfig};
use crate::annotations::{Granularity, SongAnnotations};
use crate::dsp::cqt::CqtConfig;
use crate::error::{Error, Result};

/// Settings for aligning each line (or paragraph) separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentAlignment {
    pub level: Granularity,
    pub mode: StateMode,
    pub octave_fold: bool,
    pub viterbi: ViterbiConfig,
}

impl Default for SegmentAlignment {
    fn default() -> Self {
        SegmentAlignment {
            level: Granularity::Lines,
            mode: StateMode::Pitch,
            octave_fold: false,
            viterbi: ViterbiConfig::default(),
        }
    }
}

/// Diagnostics of one segment's decode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentOutcome {
    pub segment: usize,
    pub notes: Vec<usize>,
    /// Frame window `[start, end)` the segment was decoded in.
    pub frames: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    pub duration_ratios: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Decodes every segment of `params.level` in its own window, bounded by
/// the midpoints of the gaps to the neighbouring segments, and writes the
/// new note times into a copy of `song`. Segments that fail to decode keep
/// their original notes; the failure is reported in their outcome.
pub fn align_by_segments(
    song: &SongAnnotations,
    obs: Observations,
    ladder: &CqtConfig,
    params: &SegmentAlignment,
) -> Result<(SongAnnotations, Vec<SegmentOutcome>)> {
    if params.level == Granularity::Notes {
        return Err(Error::param("segments must be words, lines or paragraphs"));
    }
    let segs = &song.level(params.level).segments;
    if segs.is_empty() {
        return Err(Error::schema(format!("{} level is empty", params.level)));
    }
    let reference = obs.pitch.or(obs.text).ok_or_else(|| Error::param("no observations given"))?;
    let total = reference.frames();
    let start_frame = reference.start_frame;
    let spacing = reference.spacing;
    let local_frame = |t: f64| -> usize {
        let g = (t / spacing).ceil().max(0.0) as usize;
        g.saturating_sub(start_frame).min(total)
    };

    let outcomes: Vec<(SegmentOutcome, Vec<(usize, f64, f64)>)> = (0..segs.len())
        .into_par_iter()
        .map(|i| {
            let members = song.descendants(params.level, i, Granularity::Notes);
            let left = if i == 0 { 0.0 } else { 0.5 * (segs[i - 1].t1 + segs[i].t0) };
            let w0 = local_frame(left);
            let w1 = if i + 1 == segs.len() { total } else { local_frame(0.5 * (segs[i].t1 + segs[i + 1].t0)) };
            let mut outcome = SegmentOutcome {
                segment: i,
                notes: members.clone(),
                frames: (w0 + start_frame, w1.max(w0) + start_frame),
                log_likelihood: None,
                duration_ratios: Vec::new(),
                error: None,
            };
            if members.is_empty() {
                return (outcome, Vec::new());
            }
            let level = crate::annotations::GranularityLevel::new(
                Granularity::Notes,
                members.iter().map(|&k| song.notes.segments[k].clone()).collect(),
            );
            let window = w0..w1.max(w0);
            let pitch = obs.pitch.map(|p| p.slice(window.clone()));
            let text = obs.text.map(|t| t.slice(window.clone()));
            let decoded = build_graph(&level, params.mode, params.octave_fold, ladder).and_then(|g| {
                viterbi_align(
                    &g,
                    Observations {
                        pitch: pitch.as_ref(),
                        text: text.as_ref(),
                    },
                    &params.viterbi,
                )
            });
            match decoded {
                Ok(a) => {
                    outcome.log_likelihood = Some(a.log_likelihood);
                    outcome.duration_ratios = a.duration_ratios;
                    let times = members
                        .iter()
                        .zip(&a.notes.segments)
                        .map(|(&k, n)| (k, n.t0, n.t1))
                        .collect();
                    (outcome, times)
                }
                Err(e) => {
                    log::warn!("{} {i}: {e}; original notes kept", params.level.name());
                    outcome.error = Some(e.to_string());
                    (outcome, Vec::new())
                }
            }
        })
        .collect();

    let mut out = song.clone();
    let mut report = Vec::with_capacity(outcomes.len());
    for (o, times) in outcomes {
        for (k, t0, t1) in times {
            out.notes.segments[k].t0 = t0;
            out.notes.segments[k].t1 = t1;
        }
        report.push(o);
    }
    Ok((out, report))
}
