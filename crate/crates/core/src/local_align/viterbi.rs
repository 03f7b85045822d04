use serde::{Deserialize, Serialize};

use super::graph::{NoteStateGraph, ObservationMatrix, StateMode};
use crate::annotations::{Granularity, GranularityLevel};
use crate::error::{Error, Result};

const FLOOR: f64 = 1e-12;

fn ln(x: f64) -> f64 {
    x.max(FLOOR).ln()
}

/// Scoring knobs of the note-state decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViterbiConfig {
    /// Bins on either side of the annotated pitch summed into a note's score.
    pub tolerance: usize,
    /// Also sum the tolerated bins one octave below and above.
    pub octave_neighbors: bool,
    /// In `[0, 1)`: note scores outside the note's annotated span are scaled by `1 - w`.
    pub prior_weight: f64,
    /// Exponent on geometric stay/leave probabilities derived from the
    /// annotated note durations; 0 leaves transitions flat.
    pub duration_prior: f64,
    /// Log-score margin within which backtracking prefers the choice that
    /// keeps a note's decoded length closer to its annotated length; 0 is
    /// plain Viterbi.
    pub backtrack_margin: f64,
    /// Weight of the text stream in joint mode.
    pub text_weight: f64,
}

impl Default for ViterbiConfig {
    fn default() -> Self {
        ViterbiConfig {
            tolerance: 1,
            octave_neighbors: false,
            prior_weight: 0.0,
            duration_prior: 0.0,
            backtrack_margin: 0.0,
            text_weight: 1.0,
        }
    }
}

impl ViterbiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.prior_weight) {
            return Err(Error::param("prior weight must lie in [0, 1)"));
        }
        if !(self.duration_prior >= 0.0) || !(self.backtrack_margin >= 0.0) || !(self.text_weight >= 0.0) {
            return Err(Error::param("duration prior, backtrack margin and text weight must be non-negative"));
        }
        Ok(())
    }
}

/// Observation streams for a decode; which ones are required depends on the graph mode.
#[derive(Debug, Clone, Copy)]
pub struct Observations<'a> {
    pub pitch: Option<&'a ObservationMatrix>,
    pub text: Option<&'a ObservationMatrix>,
}

impl<'a> Observations<'a> {
    pub fn pitch(obs: &'a ObservationMatrix) -> Self {
        Observations { pitch: Some(obs), text: None }
    }

    pub fn text(obs: &'a ObservationMatrix) -> Self {
        Observations { pitch: None, text: Some(obs) }
    }

    fn reference(&self) -> &'a ObservationMatrix {
        self.pitch.or(self.text).expect("checked by emissions")
    }
}

/// Decoded notes and state path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    #[serde(skip)]
    pub notes: GranularityLevel,
    /// State index per frame.
    pub path: Vec<usize>,
    pub log_likelihood: f64,
    /// Decoded / annotated duration per note, in frames.
    pub duration_ratios: Vec<f64>,
}

struct Trellis {
    frames: usize,
    /// `frames x n_notes` log scores.
    note: Vec<f64>,
    blank: Vec<f64>,
    /// Log stay / leave per note.
    stay: Vec<f64>,
    leave: Vec<f64>,
    annotated_frames: Vec<f64>,
}

impl Trellis {
    fn build(graph: &NoteStateGraph, obs: &Observations, cfg: &ViterbiConfig) -> Result<Trellis> {
        cfg.validate()?;
        let (pitch, text) = match graph.mode {
            StateMode::Pitch => (Some(obs.pitch.ok_or_else(|| Error::param("pitch observations required"))?), None),
            StateMode::Text => (None, Some(obs.text.ok_or_else(|| Error::param("text observations required"))?)),
            StateMode::Joint => (
                Some(obs.pitch.ok_or_else(|| Error::param("pitch observations required"))?),
                Some(obs.text.ok_or_else(|| Error::param("text observations required"))?),
            ),
        };
        if let (Some(p), Some(t)) = (pitch, text) {
            if p.frames() != t.frames() || p.start_frame != t.start_frame || (p.spacing - t.spacing).abs() > 1e-12 {
                return Err(Error::shape("pitch and text observations are on different frames"));
            }
        }
        let reference = pitch.or(text).expect("one stream present");
        let frames = reference.frames();
        let k = graph.n_notes();
        if let Some(t) = text {
            if let Some(bad) = (0..k).find(|&n| graph.text_symbol(n) >= t.bins()) {
                return Err(Error::shape(format!("note {bad} text symbol has no observation column")));
            }
        }

        let spacing = reference.spacing;
        let annotated_frames: Vec<f64> = graph
            .notes()
            .iter()
            .map(|n| ((n.t1 - n.t0) / spacing).round().max(1.0))
            .collect();
        let p = graph.bins_per_octave as i64;
        let tol = cfg.tolerance as i64;
        let bin_sets: Vec<Vec<usize>> = match pitch {
            None => vec![Vec::new(); k],
            Some(obs) => {
                let j = obs.bins() as i64;
                (0..k)
                    .map(|n| {
                        let sym = graph.pitch_symbol(n);
                        let mut set: Vec<usize> = if graph.octave_fold {
                            (0..j)
                                .filter(|b| {
                                    let d = (b.rem_euclid(p) - sym).rem_euclid(p);
                                    d.min(p - d) <= tol
                                })
                                .map(|b| b as usize)
                                .collect()
                        } else {
                            let mut centers = vec![sym];
                            if cfg.octave_neighbors {
                                centers.extend([sym - p, sym + p]);
                            }
                            centers
                                .iter()
                                .flat_map(|c| (c - tol)..=(c + tol))
                                .filter(|b| (0..j).contains(b))
                                .map(|b| b as usize)
                                .collect()
                        };
                        set.sort_unstable();
                        set.dedup();
                        set
                    })
                    .collect()
            }
        };

        let mut note = vec![0.0; frames * k];
        let mut blank = vec![0.0; frames];
        let prior = ln(1.0 - cfg.prior_weight);
        for t in 0..frames {
            let time = reference.time(t);
            let mut b = 0.0;
            if let Some(obs) = pitch {
                b += ln(obs.silence(t));
            }
            if let Some(obs) = text {
                b += cfg.text_weight * ln(obs.silence(t));
            }
            blank[t] = b;
            for n in 0..k {
                let mut s = 0.0;
                if let Some(obs) = pitch {
                    s += ln(bin_sets[n].iter().map(|&c| obs.get(t, c)).sum());
                }
                if let Some(obs) = text {
                    s += cfg.text_weight * ln(obs.get(t, graph.text_symbol(n)));
                }
                let seg = &graph.notes()[n];
                if cfg.prior_weight > 0.0 && !(seg.t0 <= time && time < seg.t1) {
                    s += prior;
                }
                note[t * k + n] = s;
            }
        }

        let lambda = cfg.duration_prior;
        let (stay, leave): (Vec<f64>, Vec<f64>) = annotated_frames
            .iter()
            .enumerate()
            .map(|(n, &d)| {
                if lambda == 0.0 {
                    return (0.0, 0.0);
                }
                let exits = if n + 1 < k { 2.0 } else { 1.0 };
                (lambda * ln(1.0 - 1.0 / d), lambda * ln(1.0 / (d * exits)))
            })
            .unzip();
        Ok(Trellis {
            frames,
            note,
            blank,
            stay,
            leave,
            annotated_frames,
        })
    }

    fn emission(&self, t: usize, s: usize) -> f64 {
        if s % 2 == 0 {
            self.blank[t]
        } else {
            self.note[t * self.stay.len() + s / 2]
        }
    }

    /// Log transition score, `None` if illegal.
    fn transition(&self, from: usize, to: usize, n_states: usize) -> Option<f64> {
        let note_from = from % 2 == 1;
        if from == to {
            return Some(if note_from { self.stay[from / 2] } else { 0.0 });
        }
        let legal = to == from + 1 || (note_from && to == from + 2 && to < n_states);
        legal.then(|| if note_from { self.leave[from / 2] } else { 0.0 })
    }
}

fn decoded_notes(graph: &NoteStateGraph, obs: &ObservationMatrix, path: &[usize]) -> GranularityLevel {
    let mut segs = graph.notes().to_vec();
    for (k, seg) in segs.iter_mut().enumerate() {
        let s = 2 * k + 1;
        let first = path.iter().position(|&x| x == s).expect("every note is visited");
        let last = path.iter().rposition(|&x| x == s).expect("every note is visited");
        seg.t0 = obs.time(first);
        seg.t1 = obs.time(last + 1);
    }
    GranularityLevel::new(Granularity::Notes, segs)
}

/// Log-likelihood of an explicit state path; errors if the path is illegal.
pub fn path_log_likelihood(
    graph: &NoteStateGraph,
    obs: Observations,
    cfg: &ViterbiConfig,
    path: &[usize],
) -> Result<f64> {
    let tr = Trellis::build(graph, &obs, cfg)?;
    let n_states = graph.n_states();
    if path.len() != tr.frames {
        return Err(Error::param("path length differs from the number of frames"));
    }
    if path.is_empty() || path[0] > 1 || path[path.len() - 1] + 2 < n_states {
        return Err(Error::param("path must start at the first note or blank and end at the last"));
    }
    let mut ll = tr.emission(0, path[0]);
    for t in 1..path.len() {
        ll += tr
            .transition(path[t - 1], path[t], n_states)
            .ok_or_else(|| Error::param(format!("illegal transition at frame {t}")))?;
        ll += tr.emission(t, path[t]);
    }
    Ok(ll)
}

/// Decodes the best state path through `graph` and re-times every note from
/// the frames its state occupies. Needs at least one frame per note.
pub fn viterbi_align(graph: &NoteStateGraph, obs: Observations, cfg: &ViterbiConfig) -> Result<Alignment> {
    let tr = Trellis::build(graph, &obs, cfg)?;
    let (t_len, n) = (tr.frames, graph.n_states());
    let k = graph.n_notes();
    if t_len < k {
        return Err(Error::Infeasible(format!("{t_len} frames cannot hold {k} notes")));
    }
    let mut delta = vec![f64::NEG_INFINITY; t_len * n];
    delta[0] = tr.emission(0, 0);
    delta[1] = tr.emission(0, 1);
    // predecessor candidates of state s, in tie-break order
    let preds = |s: usize| -> [Option<usize>; 3] {
        [Some(s), s.checked_sub(1), if s % 2 == 1 { s.checked_sub(2) } else { None }]
    };
    let score_from = |delta: &[f64], t: usize, p: usize, s: usize| -> Option<f64> {
        let prev = delta[(t - 1) * n + p];
        if prev == f64::NEG_INFINITY {
            return None;
        }
        tr.transition(p, s, n).map(|a| prev + a)
    };
    for t in 1..t_len {
        for s in 0..n.min(2 * t + 2) {
            let mut best = f64::NEG_INFINITY;
            for p in preds(s).into_iter().flatten() {
                if let Some(v) = score_from(&delta, t, p, s) {
                    if v > best {
                        best = v;
                    }
                }
            }
            if best > f64::NEG_INFINITY {
                delta[t * n + s] = best + tr.emission(t, s);
            }
        }
    }

    let last = &delta[(t_len - 1) * n..];
    let mut s = if last[n - 1] >= last[n - 2] { n - 1 } else { n - 2 };
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = s;
    let mut run = 1usize;
    for t in (1..t_len).rev() {
        let cands: Vec<(usize, f64)> = preds(s)
            .into_iter()
            .flatten()
            .filter_map(|p| score_from(&delta, t, p, s).map(|v| (p, v)))
            .collect();
        let best = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let mut choice = cands.iter().find(|c| c.1 == best).expect("reachable state").0;
        if cfg.backtrack_margin > 0.0 && s % 2 == 1 {
            let near: Vec<&(usize, f64)> = cands.iter().filter(|c| c.1 >= best - cfg.backtrack_margin).collect();
            let target = tr.annotated_frames[s / 2];
            let stay_ok = near.iter().any(|c| c.0 == s);
            let leave = near.iter().filter(|c| c.0 != s).max_by(|a, b| a.1.total_cmp(&b.1));
            choice = match (stay_ok, leave) {
                (true, _) if (run as f64) < target => s,
                (_, Some(l)) => l.0,
                _ => choice,
            };
        }
        run = if choice == s { run + 1 } else { 1 };
        s = choice;
        path[t - 1] = s;
    }

    let log_likelihood = path_log_likelihood(graph, obs, cfg, &path)?;
    let reference = obs.reference();
    let notes = decoded_notes(graph, reference, &path);
    let duration_ratios = (0..k)
        .map(|i| path.iter().filter(|&&x| x == 2 * i + 1).count() as f64 / tr.annotated_frames[i])
        .collect();
    Ok(Alignment {
        notes,
        path,
        log_likelihood,
        duration_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{frame_span, AlignedSegment, TimeGrid};
    use crate::dsp::cqt::CqtConfig;
    use crate::dsp::DenseMatrix;
    use crate::local_align::graph::build_graph;

    const H: f64 = 0.0116;

    fn level(spec: &[(f64, f64, usize)]) -> GranularityLevel {
        let c = CqtConfig::default();
        GranularityLevel::new(
            Granularity::Notes,
            spec.iter()
                .map(|&(a, b, bin)| AlignedSegment::note(a, b, c.center(bin), "la"))
                .collect(),
        )
    }

    /// One-hot observations: the note's bin while it sounds, silence otherwise.
    fn one_hot(notes: &GranularityLevel, frames: usize) -> ObservationMatrix {
        let c = CqtConfig::default();
        let grid = TimeGrid::new(H, frames).unwrap();
        let j = c.n_bins();
        let mut m = DenseMatrix::zeros(frames, j + 1);
        for t in 0..frames {
            m.set(t, j, 1.0);
        }
        for n in &notes.segments {
            let b = c.nearest_bin(n.freq()).unwrap() as usize;
            for t in frame_span(n.t0, n.t1, &grid, false) {
                m.set(t, j, 0.0);
                m.set(t, b, 1.0);
            }
        }
        ObservationMatrix::new(m, H, 0).unwrap()
    }

    fn exact_cfg() -> ViterbiConfig {
        ViterbiConfig {
            tolerance: 0,
            ..Default::default()
        }
    }

    /// All legal state paths of length `t`.
    fn all_paths(n_states: usize, t: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn go(n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == t {
                if *cur.last().unwrap() + 2 >= n {
                    out.push(cur.clone());
                }
                return;
            }
            let s = *cur.last().unwrap();
            let mut next = vec![s, s + 1];
            if s % 2 == 1 {
                next.push(s + 2);
            }
            for x in next.into_iter().filter(|&x| x < n) {
                cur.push(x);
                go(n, t, cur, out);
                cur.pop();
            }
        }
        for s0 in [0, 1] {
            go(n_states, t, &mut vec![s0], &mut out);
        }
        out
    }

    #[test]
    fn recovers_constructed_boundaries() {
        let notes = level(&[(0.1, 0.4, 30), (0.5, 0.62, 33), (0.62, 0.9, 35), (1.0, 1.3, 33)]);
        let obs = one_hot(&notes, 130);
        let g = build_graph(&notes, StateMode::Pitch, false, &CqtConfig::default()).unwrap();
        let a = viterbi_align(&g, Observations::pitch(&obs), &exact_cfg()).unwrap();
        assert_eq!(a.notes.len(), notes.len());
        for (x, y) in a.notes.segments.iter().zip(&notes.segments) {
            assert!((x.t0 - y.t0).abs() <= H + 1e-9, "{x:?} vs {y:?}");
            assert!((x.t1 - y.t1).abs() <= H + 1e-9, "{x:?} vs {y:?}");
            assert_eq!(x.freq(), y.freq());
            assert_eq!(x.text, y.text);
        }
        assert!(crate::annotations::validate(&crate::SongAnnotations {
            notes: a.notes.clone(),
            ..Default::default()
        })
        .is_empty());
    }

    #[test]
    fn matches_brute_force_on_short_trellis() {
        let mut s = 9u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let c = CqtConfig::default();
        for case in 0..20 {
            let frames = 3 + case % 4;
            let notes = level(&[(0.0, 0.02, 5), (0.03, 0.05, 7)][..1 + case % 2]);
            let m = DenseMatrix::from_fn(frames, c.n_bins() + 1, |_, _| rnd());
            let probs = DenseMatrix::from_rows(
                &m.row_iter()
                    .map(|r| {
                        let z: f64 = r.iter().sum();
                        r.iter().map(|v| v / z).collect()
                    })
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let obs = ObservationMatrix::new(probs, H, 0).unwrap();
            let g = build_graph(&notes, StateMode::Pitch, false, &c).unwrap();
            let cfg = ViterbiConfig {
                duration_prior: (case % 3) as f64 * 0.5,
                ..Default::default()
            };
            let a = viterbi_align(&g, Observations::pitch(&obs), &cfg).unwrap();
            let best = all_paths(g.n_states(), frames)
                .iter()
                .map(|p| path_log_likelihood(&g, Observations::pitch(&obs), &cfg, p).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((a.log_likelihood - best).abs() < 1e-9, "case {case}");
        }
    }

    #[test]
    fn single_note_uniform_in_time() {
        // every frame peaks at the note's bin: the note takes the whole span
        let notes = level(&[(0.0, 0.03, 20)]);
        let c = CqtConfig::default();
        let mut sal = DenseMatrix::zeros(6, c.n_bins());
        for t in 0..6 {
            sal.set(t, 20, 1.0);
        }
        let obs = crate::local_align::build_observation(&sal, H).unwrap();
        let g = build_graph(&notes, StateMode::Pitch, false, &c).unwrap();
        let a = viterbi_align(&g, Observations::pitch(&obs), &exact_cfg()).unwrap();
        let best = all_paths(3, 6)
            .into_iter()
            .max_by(|p, q| {
                let lp = path_log_likelihood(&g, Observations::pitch(&obs), &exact_cfg(), p).unwrap();
                let lq = path_log_likelihood(&g, Observations::pitch(&obs), &exact_cfg(), q).unwrap();
                lp.total_cmp(&lq)
            })
            .unwrap();
        assert_eq!(a.path, best);
        assert_eq!(a.path, vec![1; 6]);
    }

    #[test]
    fn too_few_frames_is_infeasible() {
        let notes = level(&[(0.0, 0.1, 5), (0.1, 0.2, 6), (0.2, 0.3, 7)]);
        let obs = one_hot(&notes, 2);
        let g = build_graph(&notes, StateMode::Pitch, false, &CqtConfig::default()).unwrap();
        let err = viterbi_align(&g, Observations::pitch(&obs), &exact_cfg()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(err.is_degenerate());
    }

    #[test]
    fn at_least_identity_likelihood() {
        let notes = level(&[(0.1, 0.3, 30), (0.4, 0.6, 31)]);
        let obs = one_hot(&level(&[(0.12, 0.35, 30), (0.38, 0.55, 31)]), 60);
        let g = build_graph(&notes, StateMode::Pitch, false, &CqtConfig::default()).unwrap();
        let grid = TimeGrid::new(H, 60).unwrap();
        let mut identity = vec![0usize; 60];
        for (k, n) in notes.segments.iter().enumerate() {
            for t in frame_span(n.t0, n.t1, &grid, false) {
                identity[t] = 2 * k + 1;
            }
        }
        // blanks take the index of the following gap
        let mut state = 0;
        for t in 0..60 {
            if identity[t] % 2 == 1 {
                state = identity[t];
            } else {
                identity[t] = if state == 0 { 0 } else { state + 1 };
            }
        }
        let cfg = ViterbiConfig::default();
        let base = path_log_likelihood(&g, Observations::pitch(&obs), &cfg, &identity).unwrap();
        let a = viterbi_align(&g, Observations::pitch(&obs), &cfg).unwrap();
        assert!(a.log_likelihood >= base - 1e-9);
    }

    #[test]
    fn text_and_joint_modes() {
        let c = CqtConfig::default();
        let mut notes = level(&[(0.0, 0.05, 10), (0.06, 0.1, 12)]);
        notes.segments[0].text = "Oh".into();
        notes.segments[1].text = "yes".into();
        let frames = 12;
        let mut m = DenseMatrix::zeros(frames, 27);
        for t in 0..frames {
            let col = if t < 5 { 14 } else if t < 6 { 26 } else { 24 };
            m.set(t, col, 1.0);
        }
        let text = ObservationMatrix::new(m, H, 0).unwrap();
        let g = build_graph(&notes, StateMode::Text, false, &c).unwrap();
        let a = viterbi_align(&g, Observations::text(&text), &exact_cfg()).unwrap();
        assert_eq!(a.path[..5], [1; 5]);
        assert_eq!(a.path[6..], [3; 6]);

        let pitch = one_hot(&notes, frames);
        let g = build_graph(&notes, StateMode::Joint, false, &c).unwrap();
        let obs = Observations {
            pitch: Some(&pitch),
            text: Some(&text),
        };
        assert!(viterbi_align(&g, obs, &exact_cfg()).is_ok());
        assert!(viterbi_align(&g, Observations::pitch(&pitch), &exact_cfg()).is_err());
    }

    #[test]
    fn backtrack_margin_keeps_path_legal() {
        let notes = level(&[(0.0, 0.2, 30), (0.2, 0.4, 30)]);
        let obs = one_hot(&level(&[(0.0, 0.4, 30)]), 40);
        let g = build_graph(&notes, StateMode::Pitch, false, &CqtConfig::default()).unwrap();
        let cfg = ViterbiConfig {
            tolerance: 0,
            backtrack_margin: 1.0,
            ..Default::default()
        };
        let a = viterbi_align(&g, Observations::pitch(&obs), &cfg).unwrap();
        assert!(path_log_likelihood(&g, Observations::pitch(&obs), &cfg, &a.path).is_ok());
        // the equal-pitch run is split near the annotated boundary
        let split = a.path.iter().position(|&s| s == 3).unwrap();
        assert!((split as f64 - 0.2 / H).abs() <= 2.0, "{split}");
        assert!(a.duration_ratios.iter().all(|r| (r - 1.0).abs() < 0.15));
    }
}
