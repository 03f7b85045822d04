//! JSON (optionally gzip-compressed) annotation files.
//!
//! ```text
//! {"info": {...},
//!  "annotations": {"notes": [seg...], "words": [...], "lines": [...], "paragraphs": [...]}}
//! seg = {"time": [t0, t1], "freq": [fmin, fmax], "text": "...", "phonemes": [...], "index": k}
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{AlignedSegment, Granularity, GranularityLevel, SongAnnotations};
use crate::error::{Error, Result};

/// Input files larger than this after decompression are rejected.
const MAX_DECOMPRESSED: u64 = 1 << 30;

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    time: [f64; 2],
    #[serde(default)]
    freq: [f64; 2],
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phonemes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

#[derive(Serialize, Deserialize, Default)]
struct LevelsJson {
    #[serde(default)]
    notes: Vec<SegmentJson>,
    #[serde(default)]
    words: Vec<SegmentJson>,
    #[serde(default)]
    lines: Vec<SegmentJson>,
    #[serde(default)]
    paragraphs: Vec<SegmentJson>,
}

#[derive(Serialize, Deserialize)]
struct FileJson {
    #[serde(default)]
    info: BTreeMap<String, serde_json::Value>,
    annotations: LevelsJson,
}

impl From<&AlignedSegment> for SegmentJson {
    fn from(s: &AlignedSegment) -> Self {
        SegmentJson {
            time: [s.t0, s.t1],
            freq: [s.f_min, s.f_max],
            text: s.text.clone(),
            phonemes: s.phonemes.clone(),
            index: s.parent_index,
        }
    }
}

impl From<SegmentJson> for AlignedSegment {
    fn from(s: SegmentJson) -> Self {
        AlignedSegment {
            t0: s.time[0],
            t1: s.time[1],
            f_min: s.freq[0],
            f_max: s.freq[1],
            text: s.text,
            phonemes: s.phonemes,
            parent_index: s.index,
        }
    }
}

fn to_level(level: Granularity, segs: Vec<SegmentJson>) -> GranularityLevel {
    GranularityLevel::new(level, segs.into_iter().map(Into::into).collect())
}

impl SongAnnotations {
    /// Parses an annotation document; gzip input is detected by its magic bytes.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let decompressed;
        let raw = if bytes.starts_with(&[0x1f, 0x8b]) {
            let mut buf = Vec::new();
            GzDecoder::new(bytes)
                .take(MAX_DECOMPRESSED)
                .read_to_end(&mut buf)
                .map_err(|e| Error::format(0, format!("gzip: {e}")))?;
            decompressed = buf;
            &decompressed[..]
        } else {
            bytes
        };
        let file: FileJson =
            serde_json::from_slice(raw).map_err(|e| Error::schema(format!("annotation json: {e}")))?;
        Ok(SongAnnotations {
            notes: to_level(Granularity::Notes, file.annotations.notes),
            words: to_level(Granularity::Words, file.annotations.words),
            lines: to_level(Granularity::Lines, file.annotations.lines),
            paragraphs: to_level(Granularity::Paragraphs, file.annotations.paragraphs),
            metadata: file.info,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let seg = |l: &GranularityLevel| l.segments.iter().map(SegmentJson::from).collect();
        let file = FileJson {
            info: self.metadata.clone(),
            annotations: LevelsJson {
                notes: seg(&self.notes),
                words: seg(&self.words),
                lines: seg(&self.lines),
                paragraphs: seg(&self.paragraphs),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        SongAnnotations::from_json_bytes(&bytes).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Writes JSON, gzip-compressed when the path ends in `.gz`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json_string()?;
        if path.extension().is_some_and(|e| e == "gz") {
            // Fixed header (no mtime, no name) keeps output reproducible.
            let file = std::fs::File::create(path)?;
            let mut enc = GzEncoder::new(file, Compression::default());
            enc.write_all(json.as_bytes())?;
            enc.finish()?;
        } else {
            std::fs::write(path, json)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "info": {"artist": "x", "title": "y", "fr": 43.0},
        "annotations": {
            "notes": [{"time": [0.0, 0.5], "freq": [440.0, 440.0], "text": "la", "index": 0}],
            "words": [{"time": [0.0, 0.5], "freq": [440.0, 440.0], "text": "la", "phonemes": ["L", "AA"], "index": 0}],
            "lines": [{"time": [0.0, 0.5], "text": "la", "index": 0}],
            "paragraphs": [{"time": [0.0, 0.5], "text": "la"}]
        }
    }"#;

    #[test]
    fn parses_schema() {
        let song = SongAnnotations::from_json_bytes(DOC.as_bytes()).unwrap();
        assert_eq!(song.notes.len(), 1);
        assert_eq!(song.words.segments[0].phonemes.as_deref().unwrap(), ["L", "AA"]);
        assert_eq!(song.lines.segments[0].parent_index, Some(0));
        assert_eq!(song.metadata_f64("fr"), Some(43.0));
        assert!(super::super::validate(&song).is_empty());
    }

    #[test]
    fn gzip_round_trip() {
        let song = SongAnnotations::from_json_bytes(DOC.as_bytes()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json.gz");
        song.write(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..2], &[0x1f, 0x8b]);
        assert_eq!(SongAnnotations::read(&p).unwrap(), song);
    }

    #[test]
    fn missing_annotations_is_schema_error() {
        let err = SongAnnotations::from_json_bytes(b"{\"info\": {}}").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }
}
