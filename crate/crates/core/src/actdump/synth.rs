// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic traces, so every downstream module can be exercised
//! without a real model.
//!
//! Randomness layout: the shared mean direction is drawn from ChaCha stream 0
//! of the seed; layer `i` draws from stream `i + 1`. Layers are therefore
//! independent of one another's consumption and the whole trace is
//! bit-identical for a fixed `(spec, seed)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActivationTrace, LayerActivations, Manifest};
use crate::dynamics::compress_to_dimension;
use crate::error::{Error, Result};
use crate::linalg::{extend_basis, gaussian_matrix, orthonormal_basis};

/// How the rows of one synthetic layer are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerGenerator {
    /// i.i.d. `N(0, sigma²)` entries.
    IsotropicGaussian {
        #[serde(default = "one")]
        sigma: f64,
    },
    /// `mean + sigma * z` with the trace-wide shared direction scaled to
    /// `mean_norm` and Gaussian `z`.
    SharedMeanPlusNoise { mean_norm: f64, sigma: f64 },
    /// Like `SharedMeanPlusNoise`, but the noise rows are mutually orthogonal,
    /// orthogonal to the mean, and each has norm exactly `sigma * sqrt(d)`.
    /// Needs `N + 1 <= d`.
    SharedMeanOrthogonalNoise { mean_norm: f64, sigma: f64 },
    /// A `SharedMeanOrthogonalNoise` ensemble compressed token by token down
    /// to `target_dim` (see [`compress_to_dimension`]), all within one layer.
    CompressedOrthogonalNoise {
        mean_norm: f64,
        sigma: f64,
        target_dim: usize,
    },
    /// Rows lie exactly in a seeded `k`-dimensional linear subspace.
    ConfinedSubspace { k: usize },
    /// Rows of an earlier layer compressed token by token down to
    /// `target_dim`, keeping the shared direction (see
    /// [`compress_to_dimension`]).
    CompressedFrom { layer: usize, target_dim: usize },
}

fn one() -> f64 {
    1.0
}

fn default_label() -> String {
    "synthetic".to_owned()
}

/// Shape and per-layer generators of a synthetic trace; `layers.len()` is `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_label")]
    pub model_label: String,
    pub token_count: usize,
    pub embed_dim: usize,
    #[serde(default)]
    pub random_init: bool,
    #[serde(default)]
    pub excluded_token_positions: Vec<usize>,
    pub layers: Vec<LayerGenerator>,
}

impl SyntheticSpec {
    pub fn new(token_count: usize, embed_dim: usize, layers: Vec<LayerGenerator>) -> Self {
        Self {
            model_label: default_label(),
            token_count,
            embed_dim,
            random_init: false,
            excluded_token_positions: Vec::new(),
            layers,
        }
    }

    fn manifest(&self) -> Manifest {
        let mut m = Manifest::new(
            self.model_label.clone(),
            self.layers.len(),
            self.token_count,
            self.embed_dim,
        );
        m.random_init = self.random_init;
        m.excluded_token_positions = self.excluded_token_positions.clone();
        m.tokenizer_note = Some("synthetic".to_owned());
        m
    }
}

fn layer_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit vector shared by every layer of the trace generated from `seed`.
pub fn shared_direction(seed: u64, dim: usize) -> DVector<f64> {
    let mut rng = layer_rng(seed, 0);
    let v: DVector<f64> = gaussian_matrix(dim, 1, &mut rng).column(0).into_owned();
    let n = v.norm();
    v / n
}

/// `N` rows `mean + sigma * z_i` with Gaussian `z_i`.
pub fn shared_mean_ensemble<R: Rng + ?Sized>(
    token_count: usize,
    mean: &DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let dim = mean.len();
    // Drawn column-major as dim × N, so each token's noise is contiguous in the stream.
    let noise = gaussian_matrix(dim, token_count, rng);
    DMatrix::from_fn(token_count, dim, |i, j| mean[j] + sigma * noise[(j, i)])
}

/// `N` rows `mean + sigma * sqrt(d) * q_i` where the `q_i` are orthonormal
/// and orthogonal to `mean`.
pub fn orthogonal_noise_ensemble<R: Rng + ?Sized>(
    token_count: usize,
    mean: &DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let dim = mean.len();
    if token_count + 1 > dim {
        return Err(Error::Spec(format!(
            "orthogonal noise needs token_count + 1 <= embed_dim, got {token_count} and {dim}"
        )));
    }
    let axis = if mean.norm() > 0.0 {
        orthonormal_basis(&DMatrix::from_column_slice(dim, 1, mean.as_slice()))
    } else {
        DMatrix::zeros(dim, 0)
    };
    let q = extend_basis(&axis, &gaussian_matrix(dim, token_count, rng));
    debug_assert_eq!(q.ncols(), token_count);
    let scale = sigma * (dim as f64).sqrt();
    Ok(DMatrix::from_fn(token_count, dim, |i, j| {
        mean[j] + scale * q[(j, i)]
    }))
}

/// Builds a trace from `spec`, deterministically for a fixed `seed`.
pub fn generate_synthetic_trace(spec: &SyntheticSpec, seed: u64) -> Result<ActivationTrace> {
    let (n, d) = (spec.token_count, spec.embed_dim);
    if n < 2 || d < 2 || spec.layers.len() < 2 {
        return Err(Error::Spec(format!(
            "synthetic trace needs N >= 2, d_embed >= 2 and at least 2 layers (got N={n}, d={d}, m={})",
            spec.layers.len()
        )));
    }
    let direction = shared_direction(seed, d);
    let mut layers: Vec<LayerActivations> = Vec::with_capacity(spec.layers.len());

    for (index, generator) in spec.layers.iter().enumerate() {
        let mut rng = layer_rng(seed, index as u64 + 1);
        let matrix = match *generator {
            LayerGenerator::IsotropicGaussian { sigma } => {
                check_scale(sigma, "sigma")?;
                gaussian_matrix(d, n, &mut rng).transpose() * sigma
            }
            LayerGenerator::SharedMeanPlusNoise { mean_norm, sigma } => {
                check_scale(mean_norm, "mean_norm")?;
                check_scale(sigma, "sigma")?;
                shared_mean_ensemble(n, &(&direction * mean_norm), sigma, &mut rng)
            }
            LayerGenerator::SharedMeanOrthogonalNoise { mean_norm, sigma } => {
                check_scale(mean_norm, "mean_norm")?;
                check_scale(sigma, "sigma")?;
                orthogonal_noise_ensemble(n, &(&direction * mean_norm), sigma, &mut rng)?
            }
            LayerGenerator::CompressedOrthogonalNoise { mean_norm, sigma, target_dim } => {
                check_scale(mean_norm, "mean_norm")?;
                check_scale(sigma, "sigma")?;
                let full = orthogonal_noise_ensemble(n, &(&direction * mean_norm), sigma, &mut rng)?;
                compress_to_dimension(&full, &direction, target_dim, &mut rng)
                    .map_err(|e| Error::Spec(format!("layer {index}: {e}")))?
            }
            LayerGenerator::ConfinedSubspace { k } => {
                if k == 0 || k > d {
                    return Err(Error::Spec(format!(
                        "confined subspace dimension {k} must lie in 1..={d}"
                    )));
                }
                let basis = orthonormal_basis(&gaussian_matrix(d, k, &mut rng));
                let coeffs = gaussian_matrix(n, k, &mut rng);
                coeffs * basis.transpose()
            }
            LayerGenerator::CompressedFrom { layer, target_dim } => {
                let source = layers.get(layer).ok_or_else(|| {
                    Error::Spec(format!(
                        "layer {index} compresses layer {layer}, which is not an earlier layer"
                    ))
                })?;
                compress_to_dimension(&source.matrix, &direction, target_dim, &mut rng)
                    .map_err(|e| Error::Spec(format!("layer {index}: {e}")))?
            }
        };
        layers.push(LayerActivations { index, matrix });
    }
    ActivationTrace::new(spec.manifest(), layers)
}

fn check_scale(v: f64, name: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Spec(format!("{name} must be finite and >= 0, got {v}")))
    }
}
