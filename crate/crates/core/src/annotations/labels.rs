use super::{GranularityLevel, SongAnnotations};
use crate::error::{Error, Result};

/// Per-line segment-boundary labels: 1 for the last line of each paragraph.
pub fn boundary_labels(song: &SongAnnotations) -> Result<Vec<u8>> {
    let n_par = song.paragraphs.len();
    if song.lines.is_empty() || n_par == 0 {
        return Err(Error::schema("boundary labels need both lines and paragraphs"));
    }
    let mut last = vec![None; n_par];
    for (i, line) in song.lines.segments.iter().enumerate() {
        let p = line
            .parent_index
            .ok_or_else(|| Error::schema(format!("lines[{i}] has no paragraph link")))?;
        if p >= n_par {
            return Err(Error::schema(format!("lines[{i}] links to missing paragraph {p}")));
        }
        last[p] = Some(i);
    }
    let mut y = vec![0u8; song.lines.len()];
    for i in last.into_iter().flatten() {
        y[i] = 1;
    }
    Ok(y)
}

/// Multiplies every frequency by `2^(semitones / 12)`.
pub fn transpose_frequency(notes: &GranularityLevel, semitones: i32) -> GranularityLevel {
    let factor = 2f64.powf(semitones as f64 / 12.0);
    let mut out = notes.clone();
    for s in &mut out.segments {
        s.f_min *= factor;
        s.f_max *= factor;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{AlignedSegment, Granularity};

    fn song_with(sizes: &[usize]) -> SongAnnotations {
        let mut lines = Vec::new();
        let mut paragraphs = Vec::new();
        let mut t = 0.0;
        for (p, &n) in sizes.iter().enumerate() {
            let start = t;
            for _ in 0..n {
                lines.push(AlignedSegment::span(t, t + 1.0, "x").with_parent(p));
                t += 1.0;
            }
            paragraphs.push(AlignedSegment::span(start, t, "x"));
        }
        SongAnnotations {
            lines: GranularityLevel::new(Granularity::Lines, lines),
            paragraphs: GranularityLevel::new(Granularity::Paragraphs, paragraphs),
            ..Default::default()
        }
    }

    #[test]
    fn last_line_rule() {
        assert_eq!(boundary_labels(&song_with(&[3, 2])).unwrap(), vec![0, 0, 1, 0, 1]);
        assert_eq!(boundary_labels(&song_with(&[1])).unwrap(), vec![1]);
        let y = boundary_labels(&song_with(&[2, 1, 4, 3, 2])).unwrap();
        assert_eq!(y.iter().map(|&v| v as usize).sum::<usize>(), 5);
    }

    #[test]
    fn missing_link_is_schema_error() {
        let mut song = song_with(&[2]);
        song.lines.segments[1].parent_index = None;
        assert!(matches!(boundary_labels(&song), Err(Error::Schema(_))));
    }

    #[test]
    fn transposition() {
        let notes = GranularityLevel::new(
            Granularity::Notes,
            vec![AlignedSegment::note(0.0, 1.0, 440.0, "a"), AlignedSegment::note(1.0, 2.0, 110.0, "b")],
        );
        let up = transpose_frequency(&notes, 12);
        assert_eq!(up.segments[0].freq(), 880.0);
        assert_eq!(up.segments[1].freq(), 220.0);
        assert_eq!(up.segments[0].t0, 0.0);
        assert_eq!(up.segments[1].text, "b");
        assert_eq!(transpose_frequency(&notes, 0), notes);
        let semi = transpose_frequency(&notes, 1).segments[0].freq();
        assert!((semi - 440.0 * 2f64.powf(1.0 / 12.0)).abs() < 1e-12);
        assert!((semi - 466.1637615).abs() < 1e-6);
    }
}
