use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::deform::{deform, DeformationSpec};
use super::{agreement, select_likely_correct, select_silence_correct, Split, K_WINDOW, SILENCE_WINDOW};
use crate::annotations::TimeGrid;
use crate::dsp::{matrix_energy_db, DenseMatrix, SILENCE_DB};
use crate::error::{Error, Result};

/// Context frames on each side of a patch centre (patches are `2n + 1` wide).
pub const CONTEXT_FRAMES: usize = 40;

/// One track's inputs, all `T x J` on the same frame grid.
#[derive(Debug, Clone)]
pub struct TrackInput {
    pub id: u64,
    pub spacing: f64,
    pub cqt_mix: DenseMatrix,
    pub cqt_vox: DenseMatrix,
    pub yhat: DenseMatrix,
    pub salience: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleansingConfig {
    pub split: Split,
    pub k_window: usize,
    pub silence_window: usize,
    pub silence_db: f64,
    pub context: usize,
    /// Negatives generated per positive.
    pub negatives_per_positive: f64,
    /// Cap on positives per track, drawn uniformly when exceeded.
    pub max_positives: Option<usize>,
    pub deformation: DeformationSpec,
    pub seed: u64,
}

impl Default for CleansingConfig {
    fn default() -> Self {
        CleansingConfig {
            split: Split::Train,
            k_window: K_WINDOW,
            silence_window: SILENCE_WINDOW,
            silence_db: SILENCE_DB,
            context: CONTEXT_FRAMES,
            negatives_per_positive: 1.0,
            max_positives: None,
            deformation: DeformationSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Agreement,
    Silence,
    Deformed,
}

/// Patches are `J x (2n + 1)`: bins by frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CleansingExample {
    pub mix: DenseMatrix,
    pub vox: DenseMatrix,
    pub y: DenseMatrix,
    /// 1 when the label patch is wrong.
    pub z: u8,
    pub center: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrackDataset {
    pub track_id: u64,
    #[serde(skip)]
    pub examples: Vec<CleansingExample>,
    pub positives: usize,
    pub negatives: usize,
    pub diagnostics: Vec<String>,
}

/// Frames `center - n ..= center + n` of a `T x J` matrix as a `J x (2n + 1)`
/// patch, zero outside the track.
pub fn cut_patch(m: &DenseMatrix, center: usize, n: usize) -> DenseMatrix {
    let t = m.rows() as i64;
    DenseMatrix::from_fn(m.cols(), 2 * n + 1, |bin, k| {
        let f = center as i64 + k as i64 - n as i64;
        if (0..t).contains(&f) {
            m.get(f as usize, bin)
        } else {
            0.0
        }
    })
}

/// Builds the positives and deformed negatives of one track. The RNG is
/// seeded with `seed ^ track id`, so tracks can be processed in any order.
pub fn assemble_dataset(track: &TrackInput, cfg: &CleansingConfig) -> Result<TrackDataset> {
    let shape = track.yhat.shape();
    for (name, m) in [("mixture", &track.cqt_mix), ("vocals", &track.cqt_vox), ("salience", &track.salience)] {
        if m.shape() != shape {
            return Err(Error::shape(format!("{name} is {:?}, labels are {shape:?}", m.shape())));
        }
    }
    let mut out = TrackDataset {
        track_id: track.id,
        ..Default::default()
    };
    let width = 2 * cfg.context + 1;
    if shape.0 < width {
        out.diagnostics.push(format!("track {} has {} frames, fewer than {width}; skipped", track.id, shape.0));
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ track.id);
    let scores = agreement(&track.yhat, &track.salience, track.spacing, cfg.k_window)?;
    let agreeing = select_likely_correct(&scores, cfg.split);
    let grid = TimeGrid::new(track.spacing, shape.0)?;
    let energy = matrix_energy_db(&track.cqt_vox, &grid)?;
    let silent = select_silence_correct(&energy, &track.yhat, cfg.silence_window, cfg.silence_db)?;

    let mut positives: Vec<(usize, Provenance)> = agreeing
        .iter()
        .map(|&i| (i, Provenance::Agreement))
        .chain(silent.iter().filter(|i| agreeing.binary_search(i).is_err()).map(|&i| (i, Provenance::Silence)))
        .collect();
    positives.sort_by_key(|p| p.0);
    if let Some(cap) = cfg.max_positives {
        if positives.len() > cap {
            positives.shuffle(&mut rng);
            positives.truncate(cap);
            positives.sort_by_key(|p| p.0);
        }
    }

    let example = |center: usize, y: DenseMatrix, z: u8, provenance: Provenance| CleansingExample {
        mix: cut_patch(&track.cqt_mix, center, cfg.context),
        vox: cut_patch(&track.cqt_vox, center, cfg.context),
        y,
        z,
        center,
        provenance,
    };
    let mut examples: Vec<CleansingExample> = positives
        .iter()
        .map(|&(c, p)| example(c, cut_patch(&track.yhat, c, cfg.context), 0, p))
        .collect();
    out.positives = examples.len();
    let wanted = if positives.is_empty() {
        0
    } else {
        (cfg.negatives_per_positive * positives.len() as f64).round() as usize
    };
    for j in 0..wanted {
        let src = &examples[j % out.positives];
        match deform(&src.y, &cfg.deformation, &mut rng) {
            Some((y, _)) => {
                let center = src.center;
                examples.push(example(center, y, 1, Provenance::Deformed));
                out.negatives += 1;
            }
            None => out
                .diagnostics
                .push(format!("frame {}: no legal deformation found", examples[j % out.positives].center)),
        }
    }
    out.examples = examples;
    Ok(out)
}

/// `[MMX1 mix][MMX1 vox][MMX1 y][u8 z][u32 LE centre]`.
pub fn encode_record(ex: &CleansingExample) -> Vec<u8> {
    let mut out = ex.mix.to_mmx1();
    out.extend(ex.vox.to_mmx1());
    out.extend(ex.y.to_mmx1());
    out.push(ex.z);
    out.extend((ex.center as u32).to_le_bytes());
    out
}

/// A decoded dataset record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub mix: DenseMatrix,
    pub vox: DenseMatrix,
    pub y: DenseMatrix,
    pub z: u8,
    pub center: u32,
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let mut next = || -> Result<DenseMatrix> {
            let (m, used) = DenseMatrix::decode_mmx1(&bytes[pos..]).map_err(|e| match e {
                Error::Format { offset, msg } => Error::format(pos + offset, msg),
                e => e,
            })?;
            pos += used;
            Ok(m)
        };
        let mix = next()?;
        let vox = next()?;
        let y = next()?;
        if bytes.len() < pos + 5 {
            return Err(Error::format(pos, "truncated record trailer"));
        }
        let z = bytes[pos];
        if z > 1 {
            return Err(Error::format(pos, format!("label byte {z} is not 0 or 1")));
        }
        let center = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().expect("4 bytes"));
        pos += 5;
        out.push(Record { mix, vox, y, z, center });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_track(frames: usize) -> TrackInput {
        // a melody of 20-frame notes with 10-frame rests
        let yhat = DenseMatrix::from_fn(frames, 72, |t, b| {
            let k = t / 30;
            ((t % 30) < 20 && b == 20 + (k % 5) * 2) as u8 as f64
        });
        let vox = yhat.map(|v| v * 0.8 + 1e-6);
        TrackInput {
            id: 1,
            spacing: 0.0116,
            cqt_mix: vox.map(|v| v + 0.1),
            cqt_vox: vox,
            salience: yhat.clone(),
            yhat,
        }
    }

    #[test]
    fn patch_padding() {
        let m = DenseMatrix::from_fn(10, 2, |t, b| (t * 2 + b) as f64 + 1.0);
        let p = cut_patch(&m, 0, 3);
        assert_eq!(p.shape(), (2, 7));
        assert_eq!(&p.row(0)[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(p.get(0, 3), 1.0);
        assert_eq!(p.get(1, 6), 8.0);
    }

    #[test]
    fn perfect_agreement_counts() {
        let track = toy_track(300);
        let cfg = CleansingConfig {
            split: Split::Test,
            ..Default::default()
        };
        let ds = assemble_dataset(&track, &cfg).unwrap();
        let scores = agreement(&track.yhat, &track.salience, track.spacing, cfg.k_window).unwrap();
        let expected = select_likely_correct(&scores, Split::Test).len();
        // rests are only 10 frames long, far shorter than the silence window
        assert_eq!(ds.positives, expected);
        assert!(expected > 0);
        assert_eq!(ds.negatives, ds.positives);
        for ex in &ds.examples {
            assert_eq!(ex.mix.shape(), (72, 81));
            assert_eq!(ex.vox.shape(), (72, 81));
            assert_eq!(ex.y.shape(), (72, 81));
        }
        for (neg, pos) in ds.examples[ds.positives..].iter().zip(ds.examples.iter().cycle()) {
            assert_eq!(neg.z, 1);
            assert_eq!(neg.center, pos.center);
            assert!((0..72).any(|b| neg.y.get(b, 40) != pos.y.get(b, 40)));
        }
    }

    #[test]
    fn short_track_is_skipped() {
        let ds = assemble_dataset(&toy_track(60), &CleansingConfig::default()).unwrap();
        assert!(ds.examples.is_empty());
        assert_eq!(ds.diagnostics.len(), 1);
    }

    #[test]
    fn seeded_bytes_identical_and_decodable() {
        let cfg = CleansingConfig {
            split: Split::Test,
            max_positives: Some(12),
            seed: 7,
            ..Default::default()
        };
        let bytes = |cfg: &CleansingConfig| -> Vec<u8> {
            assemble_dataset(&toy_track(400), cfg).unwrap().examples.iter().flat_map(encode_record).collect()
        };
        let a = bytes(&cfg);
        assert_eq!(a, bytes(&cfg));
        assert_ne!(a, bytes(&CleansingConfig { seed: 8, ..cfg.clone() }));
        let recs = decode_records(&a).unwrap();
        assert_eq!(recs.len(), 24);
        assert_eq!(recs[0].y.shape(), (72, 81));
        assert!(decode_records(&a[..a.len() - 2]).is_err());
    }
}
