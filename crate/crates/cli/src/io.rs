//! File loading with errors that name the file.

use std::path::Path;

use anyhow::{Context, Result};
use lyraline::dsp::matrix::{read_matrix, read_tensor3, write_matrix, write_tensor3};
use lyraline::{DenseMatrix, FrameSeries, SongAnnotations, Tensor3, TimeGrid};

pub fn annotations(path: &Path) -> Result<SongAnnotations> {
    SongAnnotations::read(path).with_context(|| format!("reading annotations {}", path.display()))
}

pub fn write_annotations(path: &Path, song: &SongAnnotations) -> Result<()> {
    song.write(path).with_context(|| format!("writing {}", path.display()))
}

pub fn matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix(path).with_context(|| format!("reading matrix {}", path.display()))
}

pub fn save_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_matrix(path, m).with_context(|| format!("writing {}", path.display()))
}

pub fn tensor(path: &Path) -> Result<Tensor3> {
    read_tensor3(path).with_context(|| format!("reading tensor {}", path.display()))
}

pub fn save_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    write_tensor3(path, t).with_context(|| format!("writing {}", path.display()))
}

pub fn save_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// A `T x 1` or `1 x T` matrix as a frame series.
pub fn series_from_matrix(m: &DenseMatrix, spacing: f64, path: &Path) -> Result<FrameSeries> {
    let values = match m.shape() {
        (_, 1) => m.data().to_vec(),
        (1, _) => m.data().to_vec(),
        (r, c) => anyhow::bail!(lyraline::Error::shape(format!(
            "{}: expected a single-column or single-row matrix, got {r}x{c}",
            path.display()
        ))),
    };
    let grid = TimeGrid::new(spacing, values.len()).with_context(|| format!("frame grid of {}", path.display()))?;
    Ok(FrameSeries::new(grid, values)?)
}

pub fn series(path: &Path, spacing: f64) -> Result<FrameSeries> {
    series_from_matrix(&matrix(path)?, spacing, path)
}

pub fn series_to_matrix(s: &FrameSeries) -> DenseMatrix {
    DenseMatrix::from_vec(s.len(), 1, s.values.clone()).expect("column shape")
}

pub fn json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| lyraline::Error::schema(format!("{}: {e}", path.display())))
        .map_err(Into::into)
}
