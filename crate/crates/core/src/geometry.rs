// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer geometry kernels: token correlator, mean cosine similarity and
//! the clipped Gram spectrum.
//!
//! Every reduction runs sequentially over rows with `f64` accumulators so
//! results are reproducible bit for bit across runs and thread counts. Only
//! [`correlator_series`] parallelizes, and only across layers.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actdump::ActivationTrace;
use crate::error::{Error, Result};

/// Default eigenvalue floor for [`gram_spectrum`].
pub const DEFAULT_CLIP: f64 = 1e-8;

/// Row indices of `vectors` that survive `excluded`.
pub fn retained_rows(rows: usize, excluded: &[usize]) -> Vec<usize> {
    let skip: BTreeSet<usize> = excluded.iter().copied().collect();
    (0..rows).filter(|i| !skip.contains(i)).collect()
}

/// Copies the retained rows into a fresh matrix.
pub fn select_rows(vectors: &DMatrix<f64>, excluded: &[usize]) -> DMatrix<f64> {
    let keep = retained_rows(vectors.nrows(), excluded);
    vectors.select_rows(keep.iter())
}

/// `(Σ_i t_i, Σ_i ‖t_i‖²)` over `rows`, accumulated in row order.
fn row_sums(vectors: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, f64) {
    let mut sum = vec![0.0; vectors.ncols()];
    let mut sq = 0.0;
    for &i in rows {
        let mut row_sq = 0.0;
        for (j, acc) in sum.iter_mut().enumerate() {
            let v = vectors[(i, j)];
            *acc += v;
            row_sq += v * v;
        }
        sq += row_sq;
    }
    (sum, sq)
}

fn pair_count(rows: &[usize]) -> Result<f64> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 retained rows, got {n}"
        )));
    }
    Ok((n * (n - 1)) as f64)
}

/// Mean pairwise dot product over ordered pairs `i != j`, and the mean
/// squared norm, of the retained rows.
pub fn pair_statistics(vectors: &DMatrix<f64>, excluded: &[usize]) -> Result<(f64, f64)> {
    let rows = retained_rows(vectors.nrows(), excluded);
    let pairs = pair_count(&rows)?;
    let (sum, sq) = row_sums(vectors, &rows);
    let total: f64 = sum.iter().map(|v| v * v).sum();
    Ok(((total - sq) / pairs, sq / rows.len() as f64))
}

/// Token correlator: mean pairwise dot product over `i != j`, divided by the
/// mean squared norm. Equals 1 for identical rows and tends to 0 for
/// isotropic ensembles.
///
/// Computed as `((‖Σ t‖² − Σ‖t‖²) / (N'(N'−1))) / (Σ‖t‖² / N')` where `N'` is
/// the number of rows not listed in `excluded`.
pub fn correlator(vectors: &DMatrix<f64>, excluded: &[usize]) -> Result<f64> {
    let (mean_dot, mean_sq) = pair_statistics(vectors, excluded)?;
    if mean_sq == 0.0 {
        return Err(Error::DegenerateInput("all retained rows are zero".into()));
    }
    Ok(mean_dot / mean_sq)
}

/// Mean of `cos(t_i, t_j)` over ordered pairs `i != j` of retained rows.
pub fn mean_cosine_similarity(vectors: &DMatrix<f64>, excluded: &[usize]) -> Result<f64> {
    let rows = retained_rows(vectors.nrows(), excluded);
    let pairs = pair_count(&rows)?;
    let mut sum = vec![0.0; vectors.ncols()];
    for &i in &rows {
        let row = vectors.row(i);
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateInput(format!("row {i} has zero norm")));
        }
        for (j, acc) in sum.iter_mut().enumerate() {
            *acc += row[j] / norm;
        }
    }
    let total: f64 = sum.iter().map(|v| v * v).sum();
    Ok(((total - rows.len() as f64) / pairs).clamp(-1.0, 1.0))
}

/// Clipped eigen-spectrum of the token Gram matrix `G_ij = t_i · t_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending, every value `>= clip_threshold`.
    pub eigenvalues: Vec<f64>,
    /// Descending, before clipping. Sums to the trace of `G`.
    pub raw_eigenvalues: Vec<f64>,
    pub clip_threshold: f64,
    /// `eigenvalues[0] / eigenvalues[N-1]` on the clipped spectrum.
    pub condition_number: f64,
    /// Eigenvalues raised to the threshold, negative ones included.
    pub num_clipped: usize,
}

/// Eigendecomposes the `N × N` Gram matrix of the rows of `vectors` and
/// floors every eigenvalue below `clip_threshold` (negative round-off
/// included) at the threshold.
pub fn gram_spectrum(vectors: &DMatrix<f64>, clip_threshold: f64) -> Result<SpectrumReport> {
    if vectors.nrows() == 0 {
        return Err(Error::DegenerateInput("Gram spectrum of zero rows".into()));
    }
    if !(clip_threshold > 0.0 && clip_threshold.is_finite()) {
        return Err(Error::Spec(format!(
            "clip threshold must be positive and finite, got {clip_threshold}"
        )));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in Gram input".into()));
    }
    let gram = vectors * vectors.transpose();
    let mut raw: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    raw.sort_by(|a, b| b.total_cmp(a));

    let mut num_clipped = 0;
    let eigenvalues: Vec<f64> = raw
        .iter()
        .map(|&l| {
            if l < clip_threshold {
                num_clipped += 1;
                clip_threshold
            } else {
                l
            }
        })
        .collect();
    let condition_number = eigenvalues[0] / eigenvalues[eigenvalues.len() - 1];
    Ok(SpectrumReport {
        eigenvalues,
        raw_eigenvalues: raw,
        clip_threshold,
        condition_number,
        num_clipped,
    })
}

/// Correlator and cosine similarity for every layer of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSeries {
    /// `E(ξ)` for `ξ = 0..m`.
    pub values: Vec<f64>,
    pub cosine: Vec<f64>,
    /// First layer attaining the minimum.
    pub argmin_layer: usize,
    /// Series minimum.
    pub e_model: f64,
    /// Last-layer value.
    pub e_final: f64,
    pub model_label: String,
    /// Rows per layer before exclusions.
    pub token_count: usize,
    pub embed_dim: usize,
    pub random_init: bool,
}

impl CorrelatorSeries {
    /// Builds a series from raw values, annotating the minimum (ties go to
    /// the smallest layer index). Cosine values default to zeros
    /// when not supplied.
    pub fn from_values(values: Vec<f64>, cosine: Option<Vec<f64>>) -> Self {
        let (argmin_layer, e_model) = argmin(&values);
        let e_final = *values.last().expect("series must not be empty");
        let cosine = cosine.unwrap_or_else(|| vec![0.0; values.len()]);
        Self {
            values,
            cosine,
            argmin_layer,
            e_model,
            e_final,
            model_label: String::new(),
            token_count: 0,
            embed_dim: 0,
            random_init: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index and value of the minimum; earliest index wins ties.
pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Applies [`correlator`] and [`mean_cosine_similarity`] to every layer,
/// honoring the manifest's excluded positions. Layers are evaluated in
/// parallel; each layer's arithmetic is sequential.
pub fn correlator_series(trace: &ActivationTrace) -> Result<CorrelatorSeries> {
    let excluded = &trace.manifest.excluded_token_positions;
    let per_layer: Vec<(f64, f64)> = trace
        .layers
        .par_iter()
        .map(|layer| {
            let e = correlator(&layer.matrix, excluded).map_err(|e| e.at_layer(layer.index))?;
            let c = mean_cosine_similarity(&layer.matrix, excluded)
                .map_err(|e| e.at_layer(layer.index))?;
            Ok((e, c))
        })
        .collect::<Result<_>>()?;
    let (values, cosine) = per_layer.into_iter().unzip();
    let mut series = CorrelatorSeries::from_values(values, Some(cosine));
    series.model_label = trace.manifest.model_label.clone();
    series.token_count = trace.manifest.token_count;
    series.embed_dim = trace.manifest.embed_dim;
    series.random_init = trace.manifest.random_init;
    Ok(series)
}

/// Gram spectrum of every layer (retained rows only).
pub fn layer_spectra(trace: &ActivationTrace, clip_threshold: f64) -> Result<Vec<SpectrumReport>> {
    let excluded = &trace.manifest.excluded_token_positions;
    trace
        .layers
        .par_iter()
        .map(|layer| {
            gram_spectrum(&select_rows(&layer.matrix, excluded), clip_threshold)
                .map_err(|e| e.at_layer(layer.index))
        })
        .collect()
}
