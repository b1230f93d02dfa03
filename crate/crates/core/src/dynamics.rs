// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic projection dynamics.
//!
//! A compression step removes, from every token, its components along a set
//! of per-token unit normals. When each token's normals are orthogonal to all
//! other tokens, pairwise dot products survive the step while squared norms
//! shrink, so the correlator grows by `(d - 1) / (d - 1 + Δd)` on average and
//! `E · (d - 1)` stays roughly constant. [`run_cascade`] measures exactly
//! that on seeded ensembles; [`mc_cos2_expectation`] is the Monte Carlo
//! check of the angular average behind the ratio.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actdump::{shared_direction, shared_mean_ensemble};
use crate::error::{Error, Result};
use crate::geometry::{correlator, pair_statistics};
use crate::linalg::{extend_basis, gaussian_matrix, orthonormal_basis};

/// Tolerance on `‖NᵀN − I‖_max` accepted by [`project_token`].
const ORTHONORMAL_TOL: f64 = 1e-8;

/// ChaCha stream used by cascades, kept apart from the streams used by the
/// synthetic-trace generator under the same seed.
const CASCADE_STREAM: u64 = 0xCA5C_ADE0;

/// How a token's normals are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMode {
    /// Uniform in the orthogonal complement of the other tokens' span, so
    /// `n · t_j = 0` holds exactly for every other token.
    #[default]
    Complement,
    /// Uniform over the whole ambient space. Pairwise dot products are no
    /// longer protected and the correlator stays roughly flat.
    FullyRandom,
}

/// Draws `count` orthonormal directions uniformly inside the orthogonal
/// complement of the span of `others` (rows are tokens).
///
/// Fails with `GeometryError` when the complement has fewer than `count`
/// dimensions.
pub fn sample_normals<R: Rng + ?Sized>(
    others: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    normals_outside(&orthonormal_basis(&others.transpose()), count, rng)
}

fn normals_outside<R: Rng + ?Sized>(
    span: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let room = span.nrows() - span.ncols();
    if count > room {
        return Err(Error::Geometry(format!(
            "complement of the other tokens has {room} dimensions, {count} normals requested"
        )));
    }
    draw_in_complement(span, count, rng)
}

/// Draws `count` orthonormal directions uniformly over the full space.
pub fn sample_random_normals<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if count > dim {
        return Err(Error::Geometry(format!(
            "{count} normals requested in dimension {dim}"
        )));
    }
    draw_in_complement(&DMatrix::zeros(dim, 0), count, rng)
}

fn draw_in_complement<R: Rng + ?Sized>(
    span: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    // A Gaussian block projected off `span` and orthonormalized is uniform
    // on the Stiefel manifold of the complement. Rank loss has probability
    // zero; retry a couple of times before giving up.
    for _ in 0..3 {
        let normals = extend_basis(span, &gaussian_matrix(span.nrows(), count, rng));
        if normals.ncols() == count {
            return Ok(normals);
        }
    }
    Err(Error::Geometry(format!(
        "could not draw {count} independent normals"
    )))
}

/// Removes the token's components along each normal:
/// `t − ‖t‖ Σ_α (t̂ · n_α) n_α`, which is the orthogonal projection
/// `t − Σ_α (t · n_α) n_α`.
///
/// `normals` holds one unit normal per column.
pub fn project_token(token: &DVector<f64>, normals: &DMatrix<f64>) -> Result<DVector<f64>> {
    let norm = token.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateInput("cannot project a zero-norm token".into()));
    }
    if normals.nrows() != token.len() {
        return Err(Error::Geometry(format!(
            "normals live in dimension {}, token in {}",
            normals.nrows(),
            token.len()
        )));
    }
    let gram = normals.transpose() * normals;
    let off = (gram - DMatrix::identity(normals.ncols(), normals.ncols())).amax();
    if off > ORTHONORMAL_TOL {
        return Err(Error::Geometry(format!(
            "normals are not orthonormal (max deviation {off:e})"
        )));
    }
    let unit = token / norm;
    let mut out = token.clone();
    for n in normals.column_iter() {
        out.axpy(-norm * unit.dot(&n), &n, 1.0);
    }
    Ok(out)
}

/// `(d − 1) / (d − 1 + Δd)`: predicted growth of the correlator when the
/// occupied dimension changes from `d` by `Δd` (negative under compression).
pub fn predicted_correlator_ratio(d: usize, delta_d: i64) -> Result<f64> {
    let base = d as f64 - 1.0;
    let denom = base + delta_d as f64;
    if denom <= 0.0 || d == 0 {
        return Err(Error::Geometry(format!(
            "ratio undefined for d = {d}, Δd = {delta_d}"
        )));
    }
    Ok(base / denom)
}

/// One compression step of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStep {
    pub d_before: usize,
    pub d_after: usize,
    /// `d_after − d_before`; zero for an identity step.
    pub delta_d: i64,
    /// Normals sampled per token, `|Δd|`.
    pub normals_per_token: usize,
}

/// Measured versus predicted correlator trajectory of one cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub mode: NormalMode,
    pub seed: u64,
    pub schedule: Vec<ProjectionStep>,
    /// Correlator before the first step and after every step.
    pub e_series: Vec<f64>,
    /// Tracked dimension alongside `e_series`.
    pub dims: Vec<usize>,
    pub predicted_ratios: Vec<f64>,
    pub measured_ratios: Vec<f64>,
    /// `E(ξ) · (d_ξ − 1)` alongside `e_series`.
    pub conservation_series: Vec<f64>,
    /// Mean pairwise dot product over `i != j` alongside `e_series`.
    pub mean_pair_dot: Vec<f64>,
    /// Per step: token-averaged `Σ_α cos²θ_α` between `t̂` and its normals.
    pub removed_cos2: Vec<f64>,
    /// Per step: `|Δd| / (d − 1)`, the ambient-dimension prediction.
    pub predicted_cos2: Vec<f64>,
    /// Per step: token-averaged dimension of the space normals were drawn in.
    pub sampling_dims: Vec<f64>,
    #[serde(skip)]
    pub final_tokens: DMatrix<f64>,
}

impl CascadeResult {
    /// Largest `|c_ξ / c_0 − 1|` over the conservation series.
    pub fn conservation_drift(&self) -> f64 {
        let c0 = self.conservation_series[0];
        self.conservation_series
            .iter()
            .map(|c| (c / c0 - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-step `|measured / predicted − 1|`.
    pub fn ratio_errors(&self) -> Vec<f64> {
        self.measured_ratios
            .iter()
            .zip(&self.predicted_ratios)
            .map(|(m, p)| (m / p - 1.0).abs())
            .collect()
    }

    /// Per-step relative change of the mean pairwise dot product.
    pub fn numerator_changes(&self) -> Vec<f64> {
        self.mean_pair_dot
            .windows(2)
            .map(|w| (w[1] / w[0] - 1.0).abs())
            .collect()
    }
}

/// Runs a compression cascade on `initial` (rows are tokens). Step `s`
/// removes `schedule[s]` normals from every token; the tracked dimension
/// starts at the ambient dimension and drops by the removed count.
///
/// Requires a positive initial correlator and `D > N + Σ schedule`.
pub fn run_cascade(
    initial: &DMatrix<f64>,
    schedule: &[usize],
    mode: NormalMode,
    seed: u64,
) -> Result<CascadeResult> {
    let (n, dim) = initial.shape();
    if n < 2 {
        return Err(Error::Geometry(format!("cascade needs at least 2 tokens, got {n}")));
    }
    let total: usize = schedule.iter().sum();
    if dim <= n + total {
        return Err(Error::Geometry(format!(
            "ambient dimension {dim} must exceed N + total removed = {}",
            n + total
        )));
    }
    let e0 = correlator(initial, &[])?;
    if !(e0 > 0.0) {
        return Err(Error::Geometry(format!(
            "initial correlator must be positive, got {e0}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CASCADE_STREAM);

    let mut tokens = initial.clone();
    let mut d = dim;
    let mut result = CascadeResult {
        mode,
        seed,
        schedule: Vec::with_capacity(schedule.len()),
        e_series: vec![e0],
        dims: vec![d],
        predicted_ratios: Vec::new(),
        measured_ratios: Vec::new(),
        conservation_series: vec![e0 * (d as f64 - 1.0)],
        mean_pair_dot: vec![pair_statistics(initial, &[])?.0],
        removed_cos2: Vec::new(),
        predicted_cos2: Vec::new(),
        sampling_dims: Vec::new(),
        final_tokens: DMatrix::zeros(0, 0),
    };

    for &count in schedule {
        let mut next = tokens.clone();
        let mut cos2_sum = 0.0;
        let mut room_sum = 0.0;
        for i in 0..n {
            let token: DVector<f64> = tokens.row(i).transpose();
            let normals = match mode {
                NormalMode::Complement => {
                    let span = orthonormal_basis(&tokens.clone().remove_row(i).transpose());
                    room_sum += (dim - span.ncols()) as f64;
                    normals_outside(&span, count, &mut rng)?
                }
                NormalMode::FullyRandom => {
                    room_sum += dim as f64;
                    sample_random_normals(dim, count, &mut rng)?
                }
            };
            let unit = &token / token.norm();
            cos2_sum += normals.column_iter().map(|c| c.dot(&unit).powi(2)).sum::<f64>();
            let projected = project_token(&token, &normals)?;
            next.set_row(i, &projected.transpose());
        }
        tokens = next;

        let e_prev = *result.e_series.last().unwrap();
        let e = correlator(&tokens, &[])?;
        let delta = -(count as i64);
        let predicted = predicted_correlator_ratio(d, delta)?;
        result.predicted_cos2.push(count as f64 / (d as f64 - 1.0));
        let d_after = d - count;
        result.schedule.push(ProjectionStep {
            d_before: d,
            d_after,
            delta_d: delta,
            normals_per_token: count,
        });
        d = d_after;
        result.e_series.push(e);
        result.dims.push(d);
        result.predicted_ratios.push(predicted);
        result.measured_ratios.push(e / e_prev);
        result.conservation_series.push(e * (d as f64 - 1.0));
        result.mean_pair_dot.push(pair_statistics(&tokens, &[])?.0);
        result.removed_cos2.push(cos2_sum / n as f64);
        result.sampling_dims.push(room_sum / n as f64);
    }
    result.final_tokens = tokens;
    Ok(result)
}

/// Parameters of a seeded cascade campaign. This is also the JSON schema
/// read by `layergeo simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub embed_dim: usize,
    pub token_count: usize,
    /// Target initial correlator; sets the shared-mean norm for unit noise.
    pub target_correlator: f64,
    /// Normals removed per step.
    pub schedule: Vec<usize>,
    /// Number of seeds in the campaign.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub mode: NormalMode,
}

fn default_seeds() -> usize {
    1
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_correlator > 0.0 && self.target_correlator < 1.0) {
            return Err(Error::Spec(format!(
                "target_correlator must lie in (0, 1), got {}",
                self.target_correlator
            )));
        }
        if self.token_count < 2 || self.embed_dim < 2 {
            return Err(Error::Spec("token_count and embed_dim must be >= 2".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Spec("seeds must be >= 1".into()));
        }
        let total: usize = self.schedule.iter().sum();
        if self.embed_dim <= self.token_count + total {
            return Err(Error::Spec(format!(
                "embed_dim {} must exceed token_count + total removed = {}",
                self.embed_dim,
                self.token_count + total
            )));
        }
        Ok(())
    }

    /// Norm of the shared mean for which a unit-variance Gaussian ensemble
    /// has expected correlator `target_correlator`:
    /// `‖μ‖² / (‖μ‖² + D) = E₀`.
    pub fn mean_norm(&self) -> f64 {
        let e0 = self.target_correlator;
        (e0 * self.embed_dim as f64 / (1.0 - e0)).sqrt()
    }

    /// Shared-mean-plus-noise starting ensemble for `seed`.
    pub fn initial_ensemble(&self, seed: u64) -> DMatrix<f64> {
        let mean = shared_direction(seed, self.embed_dim) * self.mean_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        shared_mean_ensemble(self.token_count, &mean, 1.0, &mut rng)
    }

    /// Seeds `base, base + 1, ..` of the campaign.
    pub fn seed_list(&self, base: u64) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| base.wrapping_add(i)).collect()
    }
}

/// Runs the configured cascade once per seed, in parallel. Output order
/// follows `seeds`.
pub fn run_campaign(config: &CascadeConfig, seeds: &[u64]) -> Result<Vec<CascadeResult>> {
    config.validate()?;
    seeds
        .par_iter()
        .map(|&seed| run_cascade(&config.initial_ensemble(seed), &config.schedule, config.mode, seed))
        .collect()
}

/// Compresses every token to a `target_dim`-dimensional subspace that
/// contains the shared `axis`: the axis component is kept, plus the
/// component in a uniformly random `(target_dim − 1)`-dimensional subspace
/// orthogonal to the axis, drawn independently per token.
///
/// This is the same as removing `D − target_dim` normals per token, each
/// orthogonal to the axis, so that the average of `n · t_j` over an ensemble
/// centred on the axis vanishes. Unlike [`run_cascade`] it can compress
/// below `D − N`.
pub fn compress_to_dimension<R: Rng + ?Sized>(
    tokens: &DMatrix<f64>,
    axis: &DVector<f64>,
    target_dim: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let dim = tokens.ncols();
    if axis.len() != dim {
        return Err(Error::Geometry(format!(
            "axis has dimension {}, tokens {dim}",
            axis.len()
        )));
    }
    if target_dim == 0 || target_dim > dim {
        return Err(Error::Geometry(format!(
            "target dimension {target_dim} must lie in 1..={dim}"
        )));
    }
    if axis.norm() == 0.0 {
        return Err(Error::Geometry("compression axis has zero norm".into()));
    }
    if target_dim == dim {
        return Ok(tokens.clone());
    }
    let axis_basis = orthonormal_basis(&DMatrix::from_column_slice(dim, 1, axis.as_slice()));
    let mut out = DMatrix::zeros(tokens.nrows(), dim);
    for i in 0..tokens.nrows() {
        let kept = draw_in_complement(&axis_basis, target_dim - 1, rng)?;
        let frame = DMatrix::from_columns(
            &axis_basis
                .column_iter()
                .chain(kept.column_iter())
                .map(|c| c.into_owned())
                .collect::<Vec<_>>(),
        );
        let t = tokens.row(i).transpose();
        let coeffs = frame.transpose() * &t;
        out.set_row(i, &(&frame * coeffs).transpose());
    }
    Ok(out)
}

/// Monte Carlo estimate of `E[cos²θ]` between a uniform unit vector and a
/// fixed axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cos2Estimate {
    pub dim: usize,
    pub samples: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl Cos2Estimate {
    /// Exact expectation `1 / d`.
    pub fn exact(&self) -> f64 {
        exact_cos2(self.dim)
    }

    /// `(mean − 1/d) / std_err`.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.exact()) / self.std_err
    }
}

/// `E[cos²θ] = 1/d` for a uniform direction in `d` dimensions.
pub fn exact_cos2(dim: usize) -> f64 {
    1.0 / dim as f64
}

/// Large-`d` saddle-point value `1/(d − 1)` used by the dimension argument.
pub fn asymptotic_cos2(dim: usize) -> f64 {
    1.0 / (dim as f64 - 1.0)
}

const MC_CHUNK: usize = 1 << 14;

/// Samples `samples` uniform unit vectors in dimension `dim` (normalized
/// Gaussians) and averages `cos²` against the first axis.
///
/// Work is split into fixed-size chunks, chunk `c` drawing from ChaCha
/// stream `c`, and partial sums are combined in chunk order, so the result
/// does not depend on the thread count.
pub fn mc_cos2_expectation(dim: usize, samples: usize, seed: u64) -> Result<Cos2Estimate> {
    if dim < 2 {
        return Err(Error::Spec(format!("dimension must be >= 2, got {dim}")));
    }
    if samples < 10_000 {
        return Err(Error::Spec(format!("need at least 10^4 samples, got {samples}")));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let x0: f64 = rng.sample(StandardNormal);
                let mut sq = x0 * x0;
                for _ in 1..dim {
                    let x: f64 = rng.sample(StandardNormal);
                    sq += x * x;
                }
                let c2 = x0 * x0 / sq;
                s1 += c2;
                s2 += c2 * c2;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 - n * mean * mean) / (n - 1.0);
    Ok(Cos2Estimate {
        dim,
        samples,
        mean,
        std_err: (var.max(0.0) / n).sqrt(),
    })
}
