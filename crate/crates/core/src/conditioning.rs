//! Feature-wise linear modulation (FiLM) of `W x H x C` feature maps.
//!
//! Weak conditioning applies one affine transform per channel (or one per
//! map). Strong conditioning contracts learned bases `gamma, beta` with a
//! `W x P` activation matrix `z`,
//!
//! ```text
//! FiLM(x, z) = (gamma x z) * x + (beta x z)
//! ```
//!
//! broadcasting over whichever of time, frequency and channel the basis
//! variant leaves out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{DenseMatrix, Tensor3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Weak, one scalar pair per feature map.
    #[serde(rename = "W_si")]
    WeakSimple,
    /// Weak, one pair per channel.
    #[serde(rename = "W_co")]
    WeakComplex,
    /// Strong, basis over frequency, channel and phoneme.
    #[serde(rename = "S_fv")]
    StrongFv,
    /// Strong, channel-wise basis.
    #[serde(rename = "S_cs")]
    StrongCs,
    /// Strong, frequency-wise basis.
    #[serde(rename = "S_fs")]
    StrongFs,
    /// Strong, one scalar per phoneme.
    #[serde(rename = "S_rs")]
    StrongRs,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::WeakSimple,
        Variant::WeakComplex,
        Variant::StrongFv,
        Variant::StrongCs,
        Variant::StrongFs,
        Variant::StrongRs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::WeakSimple => "W_si",
            Variant::WeakComplex => "W_co",
            Variant::StrongFv => "S_fv",
            Variant::StrongCs => "S_cs",
            Variant::StrongFs => "S_fs",
            Variant::StrongRs => "S_rs",
        }
    }

    pub fn is_strong(self) -> bool {
        !matches!(self, Variant::WeakSimple | Variant::WeakComplex)
    }

    /// Rows of the per-depth basis (before the `P` axis) for an `H x C` map.
    pub fn basis_rows(self, h: usize, c: usize) -> usize {
        match self {
            Variant::StrongFv => h * c,
            Variant::StrongCs | Variant::WeakComplex => c,
            Variant::StrongFs => h,
            Variant::StrongRs | Variant::WeakSimple => 1,
        }
    }

    #[inline]
    fn row(self, h: usize, c: usize, n_c: usize) -> usize {
        match self {
            Variant::StrongFv => h * n_c + c,
            Variant::StrongCs | Variant::WeakComplex => c,
            Variant::StrongFs => h,
            Variant::StrongRs | Variant::WeakSimple => 0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown FiLM variant {s:?}")))
    }
}

/// Where the conditioning is applied: every encoder depth or only the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Complete,
    Bottleneck,
}

impl FromStr for Placement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" | "all" => Ok(Placement::Complete),
            "bottleneck" => Ok(Placement::Bottleneck),
            _ => Err(Error::param(format!("unknown placement {s:?}"))),
        }
    }
}

/// Parses `"S_fv"` or `"S_fv*"` (the star meaning bottleneck placement).
pub fn parse_variant(s: &str) -> Result<(Variant, Placement)> {
    match s.strip_suffix('*') {
        Some(base) => Ok((base.parse()?, Placement::Bottleneck)),
        None => Ok((s.parse()?, Placement::Complete)),
    }
}

fn check_dims(x: &Tensor3) -> Result<()> {
    if x.dims().contains(&0) {
        return Err(Error::shape(format!("feature map {:?} has an empty dimension", x.dims())));
    }
    Ok(())
}

/// Weak FiLM: `gamma` and `beta` hold one value (`W_si`) or one per channel (`W_co`).
pub fn film_weak(x: &Tensor3, gamma: &[f64], beta: &[f64], variant: Variant) -> Result<Tensor3> {
    check_dims(x)?;
    if variant.is_strong() {
        return Err(Error::param(format!("{variant} is not a weak variant")));
    }
    let [_, _, c] = x.dims();
    let want = variant.basis_rows(1, c);
    if gamma.len() != want || beta.len() != want {
        return Err(Error::shape(format!(
            "{variant} needs {want} gamma and beta values, got {} and {}",
            gamma.len(),
            beta.len()
        )));
    }
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let r = variant.row(0, i % c, c);
        *v = gamma[r] * *v + beta[r];
    }
    Ok(out)
}

/// Strong-conditioning basis of one depth: `rows x P` for gamma and beta.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmBasis {
    pub variant: Variant,
    rows: usize,
    p: usize,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

impl FilmBasis {
    pub fn new(variant: Variant, rows: usize, p: usize, gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != rows * p || beta.len() != rows * p {
            return Err(Error::shape(format!("basis needs {rows}x{p} gamma and beta values")));
        }
        Ok(FilmBasis {
            variant,
            rows,
            p,
            gamma,
            beta,
        })
    }

    /// Reads a `[2, rows, P]` tensor: slice 0 is gamma, slice 1 beta.
    pub fn from_tensor(variant: Variant, t: &Tensor3) -> Result<Self> {
        let [two, rows, p] = t.dims();
        if two != 2 {
            return Err(Error::shape(format!("basis tensor must be [2, rows, P], got {:?}", t.dims())));
        }
        let (g, b) = t.data().split_at(rows * p);
        FilmBasis::new(variant, rows, p, g.to_vec(), b.to_vec())
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut data = self.gamma.clone();
        data.extend_from_slice(&self.beta);
        Tensor3::from_vec([2, self.rows, self.p], data).expect("consistent basis")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn phonemes(&self) -> usize {
        self.p
    }

    pub fn gamma(&self, row: usize, p: usize) -> f64 {
        self.gamma[row * self.p + p]
    }

    pub fn beta(&self, row: usize, p: usize) -> f64 {
        self.beta[row * self.p + p]
    }
}

/// Strong FiLM with activations `z` (`W x P`).
pub fn film_strong(x: &Tensor3, basis: &FilmBasis, z: &DenseMatrix) -> Result<Tensor3> {
    check_dims(x)?;
    let [w, h, c] = x.dims();
    let v = basis.variant;
    if !v.is_strong() {
        return Err(Error::param(format!("{v} is not a strong variant")));
    }
    if basis.rows != v.basis_rows(h, c) {
        return Err(Error::shape(format!(
            "{v} basis has {} rows, a {h}x{c} map needs {}",
            basis.rows,
            v.basis_rows(h, c)
        )));
    }
    if z.cols() != basis.p {
        return Err(Error::shape(format!("activations have {} phonemes, basis has {}", z.cols(), basis.p)));
    }
    if z.rows() != w {
        return Err(Error::shape(format!("activations have {} frames, feature map has {w}", z.rows())));
    }
    let mut out = x.clone();
    let mut mg = vec![0.0; basis.rows];
    let mut mb = vec![0.0; basis.rows];
    for t in 0..w {
        let zt = z.row(t);
        for r in 0..basis.rows {
            let (g, b) = (&basis.gamma[r * basis.p..][..basis.p], &basis.beta[r * basis.p..][..basis.p]);
            mg[r] = g.iter().zip(zt).map(|(a, z)| a * z).sum();
            mb[r] = b.iter().zip(zt).map(|(a, z)| a * z).sum();
        }
        for hh in 0..h {
            for cc in 0..c {
                let r = v.row(hh, cc, c);
                out.set(t, hh, cc, mg[r] * x.get(t, hh, cc) + mb[r]);
            }
        }
    }
    Ok(out)
}

/// Frame span of output `i` when `t` frames are split into `w` contiguous
/// spans: `[ceil(i t / w), ceil((i + 1) t / w))`.
pub fn time_span(i: usize, t: usize, w: usize) -> std::ops::Range<usize> {
    (i * t).div_ceil(w)..((i + 1) * t).div_ceil(w)
}

/// Max-pools `z` (`T x P`) down to `target_w` frames.
pub fn map_activation_time(z: &DenseMatrix, target_w: usize) -> Result<DenseMatrix> {
    let t = z.rows();
    if target_w == 0 || target_w > t {
        return Err(Error::param(format!("cannot map {t} frames onto {target_w}")));
    }
    Ok(DenseMatrix::from_fn(target_w, z.cols(), |i, p| {
        time_span(i, t, target_w).map(|f| z.get(f, p)).fold(f64::NEG_INFINITY, f64::max)
    }))
}

/// Encoder layout the parameter counts refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayout {
    pub channels: Vec<usize>,
    pub freqs: Vec<usize>,
    pub phonemes: usize,
}

impl Default for EncoderLayout {
    fn default() -> Self {
        EncoderLayout {
            channels: vec![16, 32, 64, 128, 256, 512],
            freqs: vec![256, 128, 64, 32, 16, 8],
            phonemes: 40,
        }
    }
}

/// Number of gamma/beta parameters a variant adds to the encoder.
pub fn count_parameters(variant: Variant, placement: Placement, layout: &EncoderLayout) -> Result<u64> {
    if layout.channels.len() != layout.freqs.len() || layout.channels.is_empty() {
        return Err(Error::param("encoder channels and frequencies must be non-empty and of equal length"));
    }
    let depths: Vec<(u64, u64)> = match placement {
        Placement::Complete => layout.freqs.iter().zip(&layout.channels).map(|(&h, &c)| (h as u64, c as u64)).collect(),
        Placement::Bottleneck => vec![(*layout.freqs.last().unwrap() as u64, *layout.channels.last().unwrap() as u64)],
    };
    let per_basis = if variant.is_strong() { layout.phonemes as u64 } else { 1 };
    let rows: u64 = depths.iter().map(|&(h, c)| variant.basis_rows(h as usize, c as usize) as u64).sum();
    Ok(2 * per_basis * rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rnd_tensor(dims: [usize; 3], seed: u64) -> Tensor3 {
        let mut s = seed;
        Tensor3::from_fn(dims, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn weak_identity_and_constant() {
        let x = rnd_tensor([3, 4, 2], 1);
        assert_eq!(film_weak(&x, &[1.0], &[0.0], Variant::WeakSimple).unwrap(), x);
        let c = film_weak(&x, &[0.0, 0.0], &[2.5, 2.5], Variant::WeakComplex).unwrap();
        assert!(c.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn weak_per_channel() {
        let x = rnd_tensor([3, 4, 2], 2);
        let y = film_weak(&x, &[2.0, 3.0], &[0.0, 0.0], Variant::WeakComplex).unwrap();
        for w in 0..3 {
            for h in 0..4 {
                assert_eq!(y.get(w, h, 0), 2.0 * x.get(w, h, 0));
                assert_eq!(y.get(w, h, 1), 3.0 * x.get(w, h, 1));
            }
        }
        assert!(film_weak(&x, &[2.0], &[0.0], Variant::WeakComplex).is_err());
    }

    /// Direct evaluation of the strong formula with explicit loops.
    fn naive_strong(x: &Tensor3, basis: &FilmBasis, z: &DenseMatrix) -> Tensor3 {
        let [w, h, c] = x.dims();
        Tensor3::from_fn([w, h, c], |t, hh, cc| {
            let r = match basis.variant {
                Variant::StrongFv => hh * c + cc,
                Variant::StrongCs => cc,
                Variant::StrongFs => hh,
                _ => 0,
            };
            let mut g = 0.0;
            let mut b = 0.0;
            for p in 0..basis.phonemes() {
                g += basis.gamma(r, p) * z.get(t, p);
                b += basis.beta(r, p) * z.get(t, p);
            }
            g * x.get(t, hh, cc) + b
        })
    }

    fn rnd_basis(v: Variant, h: usize, c: usize, p: usize, seed: u64) -> FilmBasis {
        let rows = v.basis_rows(h, c);
        let t = rnd_tensor([2, rows, p], seed);
        FilmBasis::from_tensor(v, &t).unwrap()
    }

    #[test]
    fn strong_matches_loops() {
        let x = rnd_tensor([2, 3, 2], 3);
        let z = DenseMatrix::from_fn(2, 4, |i, j| ((i + 1) * (j + 2) % 5) as f64 / 5.0);
        for v in [Variant::StrongFv, Variant::StrongCs, Variant::StrongFs, Variant::StrongRs] {
            let b = rnd_basis(v, 3, 2, 4, 9);
            let y = film_strong(&x, &b, &z).unwrap();
            let r = naive_strong(&x, &b, &z);
            for (a, e) in y.data().iter().zip(r.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_selects_basis_slice() {
        let x = rnd_tensor([3, 2, 2], 4);
        let b = rnd_basis(Variant::StrongCs, 2, 2, 5, 6);
        let z = DenseMatrix::from_fn(3, 5, |_, p| (p == 3) as u8 as f64);
        let y = film_strong(&x, &b, &z).unwrap();
        let w = film_weak(&x, &[b.gamma(0, 3), b.gamma(1, 3)], &[b.beta(0, 3), b.beta(1, 3)], Variant::WeakComplex).unwrap();
        assert_eq!(y, w);
        let zero = film_strong(&x, &b, &DenseMatrix::zeros(3, 5)).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strong_shape_errors() {
        let x = rnd_tensor([3, 2, 2], 4);
        let b = rnd_basis(Variant::StrongRs, 2, 2, 5, 6);
        assert!(film_strong(&x, &b, &DenseMatrix::zeros(3, 4)).is_err());
        assert!(film_strong(&x, &b, &DenseMatrix::zeros(2, 5)).is_err());
        let fv = rnd_basis(Variant::StrongFv, 3, 2, 5, 6);
        assert!(film_strong(&x, &fv, &DenseMatrix::zeros(3, 5)).is_err());
    }

    #[test]
    fn time_mapping() {
        let spans: Vec<usize> = (0..3).map(|i| time_span(i, 7, 3).len()).collect();
        assert_eq!(spans, vec![3, 2, 2]);
        let mut z = DenseMatrix::zeros(8, 2);
        z.set(5, 1, 1.0);
        let m = map_activation_time(&z, 4).unwrap();
        assert_eq!(m.get(2, 1), 1.0);
        assert_eq!(m.data().iter().sum::<f64>(), 1.0);
        assert_eq!(map_activation_time(&z, 8).unwrap(), z);
        assert!(map_activation_time(&z, 9).is_err());
    }

    #[test]
    fn spans_partition() {
        for t in 1..40 {
            for w in 1..=t {
                let spans: Vec<_> = (0..w).map(|i| time_span(i, t, w)).collect();
                assert_eq!(spans[0].start, 0);
                assert_eq!(spans[w - 1].end, t);
                for s in spans.windows(2) {
                    assert_eq!(s[0].end, s[1].start);
                }
                let lens: Vec<usize> = spans.iter().map(|s| s.len()).collect();
                assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
                assert!(lens.iter().all(|&l| l >= 1));
            }
        }
    }

    #[test]
    fn parameter_table() {
        let l = EncoderLayout::default();
        let count = |s: &str| {
            let (v, p) = parse_variant(s).unwrap();
            count_parameters(v, p, &l).unwrap()
        };
        assert_eq!(count("S_fv"), 1_966_080);
        assert_eq!(count("S_fv*"), 327_680);
        assert_eq!(count("S_cs"), 80_640);
        assert_eq!(count("S_cs*"), 40_960);
        assert_eq!(count("S_fs"), 40_320);
        assert_eq!(count("S_fs*"), 640);
        assert_eq!(count("S_rs"), 480);
        assert_eq!(count("S_rs*"), 80);
        assert_eq!(count("W_si"), 12);
        assert_eq!(count("W_co"), 2016);
    }
}
