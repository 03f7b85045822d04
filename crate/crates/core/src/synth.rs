//! Seeded synthetic songs for demos, fixtures and recovery tests.
//!
//! A song is a hierarchy of paragraphs, lines, words and notes laid out on
//! true time. [`distort`] turns it into what an annotation file would hold
//! under a wrong offset and frame rate; the renderers produce the matching
//! audio and singing-voice probabilities.

use rand::Rng;

use crate::annotations::{frame_span, AlignedSegment, FrameSeries, Granularity, GranularityLevel, SongAnnotations, TimeGrid};
use crate::dsp::AudioBuffer;
use crate::error::Result;

const WORDS: [&str; 16] = [
    "love", "night", "shine", "away", "heart", "fire", "rain", "down", "home", "light", "dream", "stay", "gold",
    "run", "sky", "time",
];

/// Layout knobs of [`random_song`].
#[derive(Debug, Clone, PartialEq)]
pub struct SongShape {
    /// Time of the first note, seconds.
    pub start: f64,
    /// The song ends before this time.
    pub duration: f64,
    /// Lines per paragraph.
    pub lines: (usize, usize),
    /// Words per line.
    pub words: (usize, usize),
    /// Notes per word.
    pub notes: (usize, usize),
    /// Note length range, seconds.
    pub note_len: (f64, f64),
    /// Silence between notes of a line, seconds.
    pub note_gap: (f64, f64),
    pub line_gap: (f64, f64),
    pub paragraph_gap: (f64, f64),
    /// MIDI pitch range of the melody.
    pub midi: (i32, i32),
    /// Repeat the first paragraph's text for every other paragraph.
    pub chorus: bool,
}

impl Default for SongShape {
    fn default() -> Self {
        SongShape {
            start: 1.0,
            duration: 30.0,
            lines: (2, 2),
            words: (2, 3),
            notes: (1, 2),
            note_len: (0.2, 0.45),
            note_gap: (0.05, 0.15),
            line_gap: (0.4, 0.8),
            paragraph_gap: (1.0, 1.5),
            midi: (52, 67),
            chorus: true,
        }
    }
}

pub fn midi_to_hz(m: f64) -> f64 {
    440.0 * 2f64.powf((m - 69.0) / 12.0)
}

fn uniform<R: Rng>(rng: &mut R, r: (f64, f64)) -> f64 {
    if r.1 > r.0 {
        rng.gen_range(r.0..r.1)
    } else {
        r.0
    }
}

/// A well-formed song on true time. With `long_gap`, the last paragraph is
/// moved that many seconds later (it must still fit before `duration`).
pub fn random_song<R: Rng>(rng: &mut R, shape: &SongShape, long_gap: Option<f64>) -> SongAnnotations {
    let mut song = SongAnnotations::default();
    let budget = shape.duration - long_gap.unwrap_or(0.0);
    let mut t = shape.start;
    let mut pitch = rng.gen_range(shape.midi.0..=shape.midi.1);
    let mut chorus_text: Vec<Vec<String>> = Vec::new();
    loop {
        let n_lines = rng.gen_range(shape.lines.0..=shape.lines.1);
        // pessimistic paragraph length, so nothing crosses the budget
        let worst = n_lines as f64 * (shape.words.1 * shape.notes.1) as f64 * (shape.note_len.1 + shape.note_gap.1)
            + n_lines as f64 * shape.line_gap.1;
        if t + worst >= budget {
            break;
        }
        push_paragraph(rng, shape, &mut song, &mut t, &mut pitch, n_lines, &mut chorus_text);
        t += uniform(rng, shape.paragraph_gap);
    }
    if let (Some(g), true) = (long_gap, song.paragraphs.len() >= 2) {
        let from = song.paragraphs.segments.last().expect("two paragraphs").t0;
        song = song.map_times(|x| if x >= from { x + g } else { x });
    }
    song
}

fn push_paragraph<R: Rng>(
    rng: &mut R,
    shape: &SongShape,
    song: &mut SongAnnotations,
    t: &mut f64,
    pitch: &mut i32,
    n_lines: usize,
    chorus_text: &mut Vec<Vec<String>>,
) {
    let p = song.paragraphs.len();
    let para_start = *t;
    let first = chorus_text.is_empty();
    let mut para_text = Vec::new();
    for l in 0..n_lines {
        if l > 0 {
            *t += uniform(rng, shape.line_gap);
        }
        let line_idx = song.lines.len();
        let line_start = *t;
        let words: Vec<String> = match chorus_text.get(l) {
            Some(w) if shape.chorus && !first => w.clone(),
            _ => {
                let n = rng.gen_range(shape.words.0..=shape.words.1);
                (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect()
            }
        };
        for (w, text) in words.iter().enumerate() {
            if w > 0 {
                *t += uniform(rng, shape.note_gap);
            }
            let word_idx = song.words.len();
            let word_start = *t;
            let n_notes = rng.gen_range(shape.notes.0..=shape.notes.1);
            for k in 0..n_notes {
                if k > 0 {
                    *t += uniform(rng, shape.note_gap);
                }
                // melodic steps, never repeating the previous pitch
                let mut step = rng.gen_range(-4..=4);
                if step == 0 {
                    step = 2;
                }
                *pitch = (*pitch + step).clamp(shape.midi.0, shape.midi.1);
                let len = uniform(rng, shape.note_len);
                let note_text = if k == 0 { text.clone() } else { "~".to_string() };
                song.notes
                    .segments
                    .push(AlignedSegment::note(*t, *t + len, midi_to_hz(*pitch as f64), note_text).with_parent(word_idx));
                *t += len;
            }
            song.words.segments.push(AlignedSegment::span(word_start, *t, text.clone()).with_parent(line_idx));
        }
        song.lines.segments.push(AlignedSegment::span(line_start, *t, words.join(" ")).with_parent(p));
        para_text.push(words);
    }
    let text = para_text.iter().map(|w| w.join(" ")).collect::<Vec<_>>().join(" ");
    song.paragraphs.segments.push(AlignedSegment::span(para_start, *t, text));
    if first {
        *chorus_text = para_text;
    }
}

/// The annotation a file would hold for `truth` if its times had been
/// derived with frame rate `fr_nominal` while the audio runs at `fr_true`,
/// shifted by `offset`: `t' = (t - offset) * fr_true / fr_nominal`.
pub fn distort(truth: &SongAnnotations, offset: f64, fr_nominal: f64, fr_true: f64) -> SongAnnotations {
    let mut out = truth.map_times(|t| (t - offset) * fr_true / fr_nominal);
    out.metadata.insert("fr".into(), fr_nominal.into());
    out.metadata.insert("offset".into(), 0.0.into());
    out
}

/// Voice probability on a `spacing` grid: `high` inside notes, `low`
/// outside, plus uniform noise of half-width `noise`, clamped to `[0, 1]`.
pub fn voice_probability<R: Rng>(
    notes: &GranularityLevel,
    spacing: f64,
    duration: f64,
    (low, high, noise): (f64, f64, f64),
    rng: &mut R,
) -> Result<FrameSeries> {
    let grid = TimeGrid::covering(spacing, duration)?;
    let mut v = vec![low; grid.n_frames];
    for s in &notes.segments {
        for i in frame_span(s.t0, s.t1, &grid, false) {
            v[i] = high;
        }
    }
    for x in v.iter_mut() {
        if noise > 0.0 {
            *x = (*x + rng.gen_range(-noise..noise)).clamp(0.0, 1.0);
        }
    }
    FrameSeries::new(grid, v)
}

/// Harmonic tones for every note (10 ms fades), silence elsewhere.
pub fn render_notes(notes: &GranularityLevel, sample_rate: u32, duration: f64, amplitude: f64) -> Result<AudioBuffer> {
    let sr = sample_rate as f64;
    let n = (duration * sr).round() as usize;
    let mut samples = vec![0f32; n];
    let fade = (0.01 * sr) as usize;
    for s in &notes.segments {
        let a = ((s.t0 * sr).round().max(0.0) as usize).min(n);
        let b = ((s.t1 * sr).round().max(0.0) as usize).min(n);
        let f = s.freq();
        let len = b.saturating_sub(a);
        for (k, x) in samples[a..b].iter_mut().enumerate() {
            let env = [1.0, k as f64 / fade.max(1) as f64, (len - k) as f64 / fade.max(1) as f64]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let ph = 2.0 * std::f64::consts::PI * f * (a + k) as f64 / sr;
            let v = ph.sin() + 0.5 * (2.0 * ph).sin() + 0.25 * (3.0 * ph).sin();
            *x += (amplitude * env * v / 1.75) as f32;
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

/// A quiet accompaniment: a low drone plus noise over the whole duration.
pub fn render_accompaniment<R: Rng>(sample_rate: u32, duration: f64, amplitude: f64, rng: &mut R) -> Result<AudioBuffer> {
    let sr = sample_rate as f64;
    let n = (duration * sr).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let v = (2.0 * std::f64::consts::PI * 55.0 * t).sin() * 0.7 + rng.gen_range(-0.3..0.3);
            (amplitude * v) as f32
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// Sample-wise sum, truncated to the shorter buffer.
pub fn mix(a: &AudioBuffer, b: &AudioBuffer) -> Result<AudioBuffer> {
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
    AudioBuffer::new(samples, a.sample_rate)
}

/// Levels of `song` whose segments all lie inside `[0, end)`.
pub fn within(song: &SongAnnotations, end: f64) -> bool {
    Granularity::ALL
        .iter()
        .all(|&g| song.level(g).segments.iter().all(|s| s.t0 >= 0.0 && s.t1 < end))
}
