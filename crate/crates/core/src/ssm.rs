//! Self-similarity matrices over the lines of a song and the context
//! patches a boundary classifier consumes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{frame_span, GranularityLevel, TimeGrid};
use crate::dsp::{DenseMatrix, Tensor3};
use crate::error::{Error, Result};
use crate::local_align::dtw;
use crate::text::str_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsmSource {
    Str,
    Mfcc,
    Chroma,
    Other,
}

/// Symmetric `k x k` similarity matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ssm {
    pub matrix: DenseMatrix,
    pub source: SsmSource,
}

impl Ssm {
    pub fn size(&self) -> usize {
        self.matrix.rows()
    }
}

fn symmetric(k: usize, cell: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<DenseMatrix> {
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| cell(i, j).map(|v| v.clamp(0.0, 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    let mut m = DenseMatrix::zeros(k, k);
    for (&(i, j), v) in pairs.iter().zip(values) {
        m.set(i, j, v);
        m.set(j, i, v);
    }
    for i in 0..k {
        m.set(i, i, 1.0);
    }
    Ok(m)
}

/// Normalized string similarity between every pair of lines.
pub fn text_ssm<S: AsRef<str> + Sync>(lines: &[S]) -> Result<Ssm> {
    if lines.is_empty() {
        return Err(Error::param("text ssm needs at least one line"));
    }
    let matrix = symmetric(lines.len(), |i, j| Ok(str_similarity(lines[i].as_ref(), lines[j].as_ref())))?;
    Ok(Ssm {
        matrix,
        source: SsmSource::Str,
    })
}

/// DTW similarity between every pair of feature segments.
pub fn audio_ssm(segments: &[DenseMatrix], source: SsmSource) -> Result<Ssm> {
    if segments.is_empty() {
        return Err(Error::param("audio ssm needs at least one segment"));
    }
    if let Some(i) = segments.iter().position(|s| s.rows() == 0) {
        return Err(Error::param(format!("segment {i} has no frames")));
    }
    let d = segments[0].cols();
    if let Some(i) = segments.iter().position(|s| s.cols() != d) {
        return Err(Error::shape(format!("segment {i} has {} features, expected {d}", segments[i].cols())));
    }
    let matrix = symmetric(segments.len(), |i, j| dtw(&segments[i], &segments[j]).map(|r| r.similarity))?;
    Ok(Ssm { matrix, source })
}

/// Rows of `features` (on `grid`) falling in each segment's `[t0, t1)`.
pub fn segment_features(features: &DenseMatrix, grid: &TimeGrid, level: &GranularityLevel) -> Result<Vec<DenseMatrix>> {
    if features.rows() != grid.n_frames {
        return Err(Error::shape(format!(
            "features have {} frames, grid has {}",
            features.rows(),
            grid.n_frames
        )));
    }
    Ok(level
        .segments
        .iter()
        .map(|s| features.slice_rows(frame_span(s.t0, s.t1, grid, false)))
        .collect())
}

/// Stacks SSMs as channels of a `k x k x C` tensor, in the given order.
pub fn stack_ssms(ssms: &[Ssm]) -> Result<Tensor3> {
    let Some(first) = ssms.first() else {
        return Err(Error::param("nothing to stack"));
    };
    let k = first.size();
    if let Some(i) = ssms.iter().position(|s| s.size() != k) {
        return Err(Error::param(format!("ssm {i} is {}x{}, expected {k}x{k}", ssms[i].size(), ssms[i].size())));
    }
    Ok(Tensor3::from_fn([k, k, ssms.len()], |i, j, c| ssms[c].matrix.get(i, j)))
}

/// Context rows `i - w ..= i + w` of a stacked SSM around line `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub line: usize,
    /// `(2w + 1) x k x C`, zero outside the matrix.
    pub data: Tensor3,
    pub label: Option<u8>,
}

/// One patch per line, zero-padded at the edges, paired with the line's
/// boundary label when `labels` is given.
pub fn extract_patches(stacked: &Tensor3, w: usize, labels: Option<&[u8]>) -> Result<Vec<Patch>> {
    let [k, k2, c] = stacked.dims();
    if k != k2 {
        return Err(Error::shape(format!("stacked ssm is {k}x{k2}, not square")));
    }
    if let Some(l) = labels {
        if l.len() != k {
            return Err(Error::shape(format!("{} labels for {k} lines", l.len())));
        }
    }
    Ok((0..k)
        .map(|i| Patch {
            line: i,
            data: Tensor3::from_fn([2 * w + 1, k, c], |r, j, ch| {
                let row = i as i64 + r as i64 - w as i64;
                if (0..k as i64).contains(&row) {
                    stacked.get(row as usize, j, ch)
                } else {
                    0.0
                }
            }),
            label: labels.map(|l| l[i]),
        })
        .collect())
}

/// Packs patches into one `k x (2w + 1) x (k * C)` tensor, channel fastest.
pub fn pack_patches(patches: &[Patch]) -> Result<Tensor3> {
    let Some(first) = patches.first() else {
        return Err(Error::param("no patches"));
    };
    let [rows, k, c] = first.data.dims();
    if patches.iter().any(|p| p.data.dims() != [rows, k, c]) {
        return Err(Error::shape("patches differ in shape"));
    }
    Ok(Tensor3::from_fn([patches.len(), rows, k * c], |i, r, x| patches[i].data.get(r, x / c, x % c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_props(m: &DenseMatrix) {
        for i in 0..m.rows() {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..m.cols() {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn identical_lines() {
        let s = text_ssm(&["la la", "La  la", "la la"]).unwrap();
        assert!(s.matrix.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn kitten_sitting() {
        let s = text_ssm(&["kitten", "sitting"]).unwrap();
        assert!((s.matrix.get(0, 1) - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        check_props(&s.matrix);
    }

    #[test]
    fn orthogonal_constant_segments() {
        let a = DenseMatrix::from_fn(4, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let b = DenseMatrix::from_fn(3, 2, |_, j| if j == 1 { 2.0 } else { 0.0 });
        let s = audio_ssm(&[a.clone(), b, a], SsmSource::Mfcc).unwrap();
        assert_eq!(s.matrix.get(0, 1), 0.0);
        assert_eq!(s.matrix.get(0, 2), 1.0);
        check_props(&s.matrix);
    }

    #[test]
    fn audio_matches_pairwise_dtw() {
        let segs: Vec<DenseMatrix> = (0..3)
            .map(|s| DenseMatrix::from_fn(2 + s, 3, |i, j| ((i * 7 + j * 3 + s * 5) % 11) as f64 - 4.0))
            .collect();
        let ssm = audio_ssm(&segs, SsmSource::Chroma).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(ssm.matrix.get(i, j), dtw(&segs[i], &segs[j]).unwrap().similarity);
                }
            }
        }
    }

    #[test]
    fn empty_segment_is_named() {
        let a = DenseMatrix::zeros(2, 2);
        let err = audio_ssm(&[a, DenseMatrix::zeros(0, 2)], SsmSource::Other).unwrap_err();
        assert!(err.to_string().contains("segment 1"));
    }

    #[test]
    fn stacking() {
        let a = text_ssm(&["a", "b", "c"]).unwrap();
        let t = stack_ssms(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(t.dims(), [3, 3, 3]);
        assert_eq!(stack_ssms(&[a.clone()]).unwrap().dims(), [3, 3, 1]);
        let b = text_ssm(&["a", "b"]).unwrap();
        assert!(matches!(stack_ssms(&[a, b]), Err(Error::Param(_))));
    }

    #[test]
    fn patch_shapes_and_padding() {
        let lines = ["one", "two", "three", "four", "five"];
        let t = stack_ssms(&[text_ssm(&lines).unwrap()]).unwrap();
        let p0 = extract_patches(&t, 0, None).unwrap();
        assert_eq!(p0[2].data.dims(), [1, 5, 1]);
        assert_eq!(p0[2].data.get(0, 2, 0), 1.0);
        let p1 = extract_patches(&t, 1, Some(&[0, 1, 0, 0, 1])).unwrap();
        assert_eq!(p1.len(), 5);
        assert!(p1.iter().all(|p| p.data.dims() == [3, 5, 1]));
        assert_eq!(p1[1].label, Some(1));
        let p2 = extract_patches(&t, 2, None).unwrap();
        assert!(p2[0].data.data()[..10].iter().all(|&v| v == 0.0));
        assert_eq!(p2[0].data.get(2, 0, 0), 1.0);
        let packed = pack_patches(&p2).unwrap();
        assert_eq!(packed.dims(), [5, 5, 5]);
        assert_eq!(packed.get(3, 2, 3), 1.0);
    }
}
