//! Dense matrices and their on-disk formats.
//!
//! `MMX1`: magic `"MMX1"`, rows (u32 LE), cols (u32 LE), then `rows * cols`
//! f32 LE values in row-major order. `MMX3` is the same with a third u32
//! dimension in the header. Values are held as f64 in memory and stored as
//! f32 on disk; any f32 payload round-trips bit-exactly.

use std::path::Path;

use crate::error::{Error, Result};

pub const MMX1_MAGIC: &[u8; 4] = b"MMX1";
pub const MMX3_MAGIC: &[u8; 4] = b"MMX3";

/// Row-major real matrix with optional axis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Time in seconds of each row.
    pub row_axis: Option<Vec<f64>>,
    /// Frequency in Hz of each column.
    pub col_axis: Option<Vec<f64>>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            row_axis: None,
            col_axis: None,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite matrix entry at flat index {i}")));
        }
        Ok(DenseMatrix {
            rows,
            cols,
            data,
            row_axis: None,
            col_axis: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        DenseMatrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix {
            rows,
            cols,
            data,
            row_axis: None,
            col_axis: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Lowest column index holding the row maximum.
    pub fn row_argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i));
        t.row_axis = self.col_axis.clone();
        t.col_axis = self.row_axis.clone();
        t
    }

    /// Rows `range`, without axis labels.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> DenseMatrix {
        let range = range.start.min(self.rows)..range.end.min(self.rows);
        DenseMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
            row_axis: None,
            col_axis: self.col_axis.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.data.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn to_mmx1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        out.extend_from_slice(MMX1_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Decodes one MMX1 matrix from the front of `bytes`, returning it and
    /// the number of bytes consumed.
    pub fn decode_mmx1(bytes: &[u8]) -> Result<(DenseMatrix, usize)> {
        let (dims, consumed, data) = decode_header(bytes, MMX1_MAGIC, 2)?;
        Ok((DenseMatrix::from_vec(dims[0], dims[1], data)?, consumed))
    }

    pub fn from_mmx1(bytes: &[u8]) -> Result<DenseMatrix> {
        let (m, used) = DenseMatrix::decode_mmx1(bytes)?;
        if used != bytes.len() {
            return Err(Error::format(used, format!("{} trailing bytes", bytes.len() - used)));
        }
        Ok(m)
    }

    /// Parses comma-separated rows; blank lines are ignored.
    pub fn from_csv(text: &str) -> Result<DenseMatrix> {
        let mut rows = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                let row = trimmed
                    .split(',')
                    .map(|cell| {
                        cell.trim().parse::<f64>().map_err(|e| {
                            Error::format(offset, format!("bad csv value '{}': {e}", cell.trim()))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if let Some(first) = rows.first() {
                    let first: &Vec<f64> = first;
                    if first.len() != row.len() {
                        return Err(Error::format(
                            offset,
                            format!("csv row has {} values, expected {}", row.len(), first.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            offset += line.len();
        }
        DenseMatrix::from_rows(&rows).map_err(|e| Error::format(0, e.to_string()))
    }
}

/// Parses a `magic + ndims * u32 + f32 payload` header.
fn decode_header(bytes: &[u8], magic: &[u8; 4], ndims: usize) -> Result<([usize; 3], usize, Vec<f64>)> {
    let header = 4 + 4 * ndims;
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len(), "truncated magic"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(0, format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    if bytes.len() < header {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    let mut dims = [1usize; 3];
    for (d, dim) in dims.iter_mut().enumerate().take(ndims) {
        let at = 4 + 4 * d;
        *dim = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    }
    let count = dims[..ndims].iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let payload = count
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format(4, "dimensions overflow"))?;
    let available = bytes.len() - header;
    if available < payload {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: need {payload} bytes, have {available}"),
        ));
    }
    let mut data = Vec::with_capacity(payload / 4);
    for (k, chunk) in bytes[header..header + payload].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(header + 4 * k, "non-finite value"));
        }
        data.push(v as f64);
    }
    Ok((dims, header + payload, data))
}

/// Row-major 3-D tensor `d0 x d1 x d2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Tensor3 {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::shape(format!(
                "{} values cannot fill a {}x{}x{} tensor",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    data.push(f(a, b, c));
                }
            }
        }
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dims[1] + b) * self.dims[2] + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.offset(a, b, c)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let o = self.offset(a, b, c);
        self.data[o] = v;
    }

    pub fn to_mmx3(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(MMX3_MAGIC);
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_mmx3(bytes: &[u8]) -> Result<Tensor3> {
        let (dims, used, data) = decode_header(bytes, MMX3_MAGIC, 3)?;
        if used != bytes.len() {
            return Err(Error::format(used, format!("{} trailing bytes", bytes.len() - used)));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(16, "non-finite value"));
        }
        Tensor3::from_vec(dims, data)
    }

    /// A 2-D matrix viewed as `rows x cols x 1`.
    pub fn from_matrix(m: &DenseMatrix) -> Tensor3 {
        Tensor3 {
            dims: [m.rows(), m.cols(), 1],
            data: m.data().to_vec(),
        }
    }
}

/// Reads a matrix: `.csv` by extension, otherwise MMX1.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::format(e.valid_up_to(), "csv is not utf-8"))?;
        DenseMatrix::from_csv(text)
    } else {
        DenseMatrix::from_mmx1(&bytes)
    };
    parsed.map_err(|e| annotate(path, e))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    std::fs::write(path, m.to_mmx1())?;
    Ok(())
}

pub fn read_tensor3(path: impl AsRef<Path>) -> Result<Tensor3> {
    let path = path.as_ref();
    Tensor3::from_mmx3(&std::fs::read(path)?).map_err(|e| annotate(path, e))
}

pub fn write_tensor3(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    std::fs::write(path, t.to_mmx3())?;
    Ok(())
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}
