use std::cmp::Ordering;

use serde::Serialize;

use super::graph::{NoteStateGraph, StateMode};
use super::viterbi::{viterbi_align, Alignment, Observations, ViterbiConfig};
use crate::error::Result;

/// Octave, fifth, fourth and major third, both directions.
pub const VARIANT_INTERVALS: [i64; 8] = [12, -12, 7, -7, 5, -5, 4, -4];

#[derive(Debug, Clone, Serialize)]
pub struct BeamResult {
    /// Semitone substitution applied to each note.
    pub shifts: Vec<i64>,
    pub log_likelihood: f64,
    pub alignment: Alignment,
    #[serde(skip)]
    pub graph: NoteStateGraph,
}

struct Hypothesis {
    shifts: Vec<i64>,
    graph: NoteStateGraph,
    alignment: Alignment,
}

/// Higher likelihood first, then fewer and smaller substitutions.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    let key = |h: &Hypothesis| {
        (
            h.shifts.iter().filter(|&&s| s != 0).count(),
            h.shifts.iter().map(|s| s.unsigned_abs()).sum::<u64>(),
        )
    };
    b.alignment
        .log_likelihood
        .total_cmp(&a.alignment.log_likelihood)
        .then_with(|| key(a).cmp(&key(b)))
        .then_with(|| {
            let order = |h: &Hypothesis| h.shifts.iter().map(|&s| (s.unsigned_abs(), s)).collect::<Vec<_>>();
            order(a).cmp(&order(b))
        })
}

/// Left-to-right beam search over per-note pitch substitutions drawn from
/// `intervals` (plus no substitution). Every hypothesis is scored by a full
/// decode. Text-only graphs have nothing to substitute and decode as is.
pub fn beam_variants(
    graph: &NoteStateGraph,
    obs: Observations,
    cfg: &ViterbiConfig,
    intervals: &[i64],
    beam_width: usize,
) -> Result<BeamResult> {
    let k = graph.n_notes();
    let n_bins = obs.pitch.map_or(0, |p| p.bins());
    let base = Hypothesis {
        shifts: vec![0; k],
        graph: graph.clone(),
        alignment: viterbi_align(graph, obs, cfg)?,
    };
    if graph.mode == StateMode::Text || beam_width == 0 {
        return Ok(finish(base));
    }
    let mut choices = vec![0i64];
    for &i in intervals {
        if !choices.contains(&i) {
            choices.push(i);
        }
    }
    let mut beam = vec![base];
    for note in 0..k {
        let mut next = Vec::new();
        for h in &beam {
            for &c in &choices {
                let mut shifts = h.shifts.clone();
                shifts[note] = c;
                let Some(g) = graph.with_shifts(&shifts, n_bins) else { continue };
                let alignment = if c == 0 { h.alignment.clone() } else { viterbi_align(&g, obs, cfg)? };
                next.push(Hypothesis {
                    shifts,
                    graph: g,
                    alignment,
                });
            }
        }
        next.sort_by(rank);
        next.truncate(beam_width);
        beam = next;
    }
    Ok(finish(beam.into_iter().next().expect("the unshifted hypothesis survives expansion")))
}

fn finish(h: Hypothesis) -> BeamResult {
    BeamResult {
        log_likelihood: h.alignment.log_likelihood,
        shifts: h.shifts,
        alignment: h.alignment,
        graph: h.graph,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{frame_span, AlignedSegment, Granularity, GranularityLevel, TimeGrid};
    use crate::dsp::cqt::CqtConfig;
    use crate::dsp::DenseMatrix;
    use crate::local_align::graph::{build_graph, ObservationMatrix};

    const H: f64 = 0.0116;

    fn setup(annotated: &[usize], sounding: &[usize]) -> (NoteStateGraph, ObservationMatrix) {
        let c = CqtConfig::default();
        let spans: Vec<(f64, f64)> = (0..annotated.len()).map(|k| (0.05 + 0.3 * k as f64, 0.3 + 0.3 * k as f64)).collect();
        let notes = GranularityLevel::new(
            Granularity::Notes,
            spans.iter().zip(annotated).map(|(&(a, b), &bin)| AlignedSegment::note(a, b, c.center(bin), "la")).collect(),
        );
        let frames = ((0.35 + 0.3 * annotated.len() as f64) / H) as usize;
        let grid = TimeGrid::new(H, frames).unwrap();
        let j = c.n_bins();
        // soft observations so that near misses still carry some mass
        let mut m = DenseMatrix::from_fn(frames, j + 1, |_, col| if col == j { 0.5 } else { 0.5 / j as f64 });
        for (&(a, b), &bin) in spans.iter().zip(sounding) {
            for t in frame_span(a, b, &grid, false) {
                for col in 0..=j {
                    m.set(t, col, if col == bin { 0.9 } else { 0.1 / j as f64 });
                }
            }
        }
        let g = build_graph(&notes, StateMode::Pitch, false, &c).unwrap();
        (g, ObservationMatrix::new(m, H, 0).unwrap())
    }

    fn cfg() -> ViterbiConfig {
        ViterbiConfig {
            tolerance: 0,
            ..Default::default()
        }
    }

    #[test]
    fn original_wins_when_obs_match() {
        let (g, obs) = setup(&[30, 34], &[30, 34]);
        let r = beam_variants(&g, Observations::pitch(&obs), &cfg(), &VARIANT_INTERVALS, 4).unwrap();
        assert_eq!(r.shifts, vec![0, 0]);
    }

    #[test]
    fn octave_substitution_matches_exhaustive() {
        let (g, obs) = setup(&[30, 34], &[30, 46]);
        let r = beam_variants(&g, Observations::pitch(&obs), &cfg(), &VARIANT_INTERVALS, 81).unwrap();
        let mut choices = vec![0];
        choices.extend(VARIANT_INTERVALS);
        let mut best: Option<(f64, Vec<i64>)> = None;
        for &a in &choices {
            for &b in &choices {
                let Some(v) = g.with_shifts(&[a, b], obs.bins()) else { continue };
                let ll = viterbi_align(&v, Observations::pitch(&obs), &cfg()).unwrap().log_likelihood;
                if best.as_ref().is_none_or(|(l, _)| ll > *l) {
                    best = Some((ll, vec![a, b]));
                }
            }
        }
        let (ll, shifts) = best.unwrap();
        assert_eq!(shifts, vec![0, 12]);
        assert_eq!(r.shifts, shifts);
        assert!((r.log_likelihood - ll).abs() < 1e-9);
    }

    #[test]
    fn width_one_is_greedy() {
        let (g, obs) = setup(&[30, 34, 20], &[37, 46, 16]);
        let r = beam_variants(&g, Observations::pitch(&obs), &cfg(), &VARIANT_INTERVALS, 1).unwrap();
        let mut shifts = vec![0i64; 3];
        for k in 0..3 {
            let mut best: Option<(f64, i64)> = None;
            for c in std::iter::once(0).chain(VARIANT_INTERVALS) {
                shifts[k] = c;
                let Some(v) = g.with_shifts(&shifts, obs.bins()) else { continue };
                let ll = viterbi_align(&v, Observations::pitch(&obs), &cfg()).unwrap().log_likelihood;
                if best.is_none_or(|(l, _)| ll > l) {
                    best = Some((ll, c));
                }
            }
            shifts[k] = best.unwrap().1;
        }
        assert_eq!(r.shifts, shifts);
        assert_eq!(r.shifts, vec![7, 12, -4]);
    }
}
