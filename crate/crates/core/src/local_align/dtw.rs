use serde::Serialize;

use crate::dsp::DenseMatrix;
use crate::error::{Error, Result};

/// `1 - |cos(a, b)|`; 1 when either vector has zero norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let d = 1.0 - (dot / (na.sqrt() * nb.sqrt())).abs();
    // parallel vectors land a few ulps off zero
    if d < 1e-12 {
        0.0
    } else {
        d.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtwResult {
    pub cost: f64,
    pub path: Vec<(usize, usize)>,
    pub similarity: f64,
}

impl DtwResult {
    pub fn path_len(&self) -> usize {
        self.path.len()
    }
}

/// Frame-wise DTW of two `n x d` feature sequences under [`cosine_distance`].
///
/// Steps are `(1,1)`, `(1,0)` and `(0,1)`; ties prefer the diagonal.
/// `similarity = 1 - cost / path_len`.
pub fn dtw(a: &DenseMatrix, b: &DenseMatrix) -> Result<DtwResult> {
    let (n, m) = (a.rows(), b.rows());
    if n == 0 || m == 0 {
        return Err(Error::param("dtw needs non-empty sequences"));
    }
    if a.cols() != b.cols() {
        return Err(Error::shape(format!("feature dimensions differ: {} vs {}", a.cols(), b.cols())));
    }
    let mut acc = vec![f64::INFINITY; n * m];
    let mut step = vec![0u8; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = cosine_distance(a.row(i), b.row(j));
            if i == 0 && j == 0 {
                acc[0] = d;
                continue;
            }
            let mut best = (f64::INFINITY, 0u8);
            if i > 0 && j > 0 {
                best = (acc[(i - 1) * m + j - 1], 0);
            }
            if i > 0 && acc[(i - 1) * m + j] < best.0 {
                best = (acc[(i - 1) * m + j], 1);
            }
            if j > 0 && acc[i * m + j - 1] < best.0 {
                best = (acc[i * m + j - 1], 2);
            }
            acc[i * m + j] = best.0 + d;
            step[i * m + j] = best.1;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        match step[i * m + j] {
            0 => {
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            _ => j -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    let cost = acc[n * m - 1];
    let similarity = (1.0 - cost / path.len() as f64).clamp(0.0, 1.0);
    Ok(DtwResult { cost, path, similarity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Minimum cost over every monotone, contiguous path.
    fn enumerate(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        fn go(a: &DenseMatrix, b: &DenseMatrix, i: usize, j: usize) -> f64 {
            let d = cosine_distance(a.row(i), b.row(j));
            if i + 1 == a.rows() && j + 1 == b.rows() {
                return d;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.rows() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.rows() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.rows() && j + 1 < b.rows() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            d + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn identical_sequences() {
        let a = mat(&[&[1.0, 0.0], &[0.5, 0.5], &[0.0, 2.0]]);
        let r = dtw(&a, &a).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.similarity, 1.0);
        assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn single_cells() {
        let a = mat(&[&[1.0, 0.0]]);
        let b = mat(&[&[1.0, 1.0]]);
        let r = dtw(&a, &b).unwrap();
        assert!((r.similarity - (1.0 - cosine_distance(a.row(0), b.row(0)))).abs() < 1e-15);
        assert!((r.similarity - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn matches_path_enumeration() {
        let mut s = 42u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..50 {
            let a = DenseMatrix::from_fn(3, 2, |_, _| rnd());
            let b = DenseMatrix::from_fn(4, 2, |_, _| rnd());
            let r = dtw(&a, &b).unwrap();
            assert!((r.cost - enumerate(&a, &b)).abs() < 1e-12);
            let along: f64 = r.path.iter().map(|&(i, j)| cosine_distance(a.row(i), b.row(j))).sum();
            assert!((along - r.cost).abs() < 1e-12);
            assert!((dtw(&b, &a).unwrap().cost - r.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_norm_frame_has_unit_distance() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-3.0, 0.0]), 0.0);
    }

    #[test]
    fn empty_is_error() {
        let a = DenseMatrix::zeros(0, 2);
        let b = mat(&[&[1.0, 0.0]]);
        assert!(matches!(dtw(&a, &b), Err(Error::Param(_))));
    }
}
