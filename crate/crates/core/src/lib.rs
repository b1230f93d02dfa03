// SPDX-License-Identifier: MIT OR Apache-2.0

//! # layergeo
//!
//! Representation-geometry diagnostics for transformer hidden states.
//!
//! Given per-layer token matrices from one forward pass, `layergeo` computes
//! the token correlator (mean pairwise dot product over mean squared norm),
//! mean cosine similarity, and the clipped Gram spectrum of every layer. A
//! random-weight baseline calibrates the constant `E · (d − 1)`, from which
//! the working-space dimension `d_model` (series minimum) and the semantic
//! dimension `d_machine` (final layer) follow.
//!
//! The [`dynamics`] module simulates the projection picture behind the
//! constant on synthetic ensembles and carries a Monte Carlo check of the
//! hypersphere average `E[cos²θ] = 1/d`.
//!
//! ```
//! use layergeo::{correlator, generate_synthetic_trace, correlator_series, LayerGenerator, SyntheticSpec};
//! use nalgebra::DMatrix;
//!
//! let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
//! assert!((correlator(&m, &[]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
//!
//! let spec = SyntheticSpec::new(32, 64, vec![
//!     LayerGenerator::SharedMeanPlusNoise { mean_norm: 4.0, sigma: 1.0 },
//!     LayerGenerator::IsotropicGaussian { sigma: 1.0 },
//! ]);
//! let trace = generate_synthetic_trace(&spec, 7).unwrap();
//! let series = correlator_series(&trace).unwrap();
//! assert_eq!(series.argmin_layer, 1);
//! ```

pub mod actdump;
pub mod dimensions;
pub mod dynamics;
pub mod error;
pub mod geometry;
mod linalg;
pub mod report;

pub use actdump::{
    generate_synthetic_trace, read_layer, read_manifest, read_trace, write_trace,
    ActivationTrace, LayerActivations, LayerGenerator, Manifest, SyntheticSpec,
};
pub use dimensions::{
    calibrate, combine_calibrations, detect_plateau, estimate_dimensions, Calibration,
    DimensionEstimate, EstimateOptions, Plateau,
};
pub use dynamics::{
    compress_to_dimension, mc_cos2_expectation, predicted_correlator_ratio, project_token,
    run_campaign, run_cascade, sample_normals, CascadeConfig, CascadeResult, Cos2Estimate,
    NormalMode, ProjectionStep,
};
pub use error::{Error, Result};
pub use geometry::{
    correlator, correlator_series, gram_spectrum, mean_cosine_similarity, CorrelatorSeries,
    SpectrumReport,
};
