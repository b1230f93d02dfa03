// SPDX-License-Identifier: MIT OR Apache-2.0

//! Intrinsic dimensions from correlator series.
//!
//! A random-weight baseline anchors the constant `E_random · (d_embed − 1)`;
//! a trained model's series minimum and final value then give
//! `d_model = constant / E_model + 1` and `d_machine = constant / E_machine + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{argmin, CorrelatorSeries};

/// Default plateau window (layers).
pub const PLATEAU_WINDOW: usize = 3;
/// Default relative step tolerance inside a plateau.
pub const PLATEAU_REL_TOL: f64 = 0.05;

/// A flat trailing run of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub start_layer: usize,
    /// Mean of the run.
    pub value: f64,
}

/// Finds the earliest layer from which the series stays flat to the end:
/// every consecutive pair in the run differs by at most `rel_tol` relative to
/// the larger magnitude, and the run holds at least `window` values.
pub fn detect_plateau(series: &[f64], window: usize, rel_tol: f64) -> Option<Plateau> {
    let window = window.max(2);
    if series.len() < window {
        return None;
    }
    let flat = |a: f64, b: f64| (b - a).abs() <= rel_tol * a.abs().max(b.abs());
    let mut start = series.len() - 1;
    while start > 0 && flat(series[start - 1], series[start]) {
        start -= 1;
    }
    let run = &series[start..];
    if run.len() < window {
        return None;
    }
    Some(Plateau {
        start_layer: start,
        value: run.iter().sum::<f64>() / run.len() as f64,
    })
}

/// Constant anchored on a random-weight baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Minimum of the baseline series (averaged when several baselines are combined).
    pub e_random: f64,
    pub d_embed: usize,
    /// `e_random · (d_embed − 1)`.
    pub constant: f64,
    pub source_label: String,
    pub baseline_argmin_layer: usize,
    pub token_count: usize,
    /// Flat tail of the baseline, reported next to the minimum.
    pub plateau: Option<Plateau>,
    /// Whether the minimum sits on the detected plateau.
    pub min_on_plateau: bool,
    pub warnings: Vec<String>,
}

/// Calibrates on a baseline series, which must come from a random-weight
/// trace (`series.random_init`).
pub fn calibrate(baseline: &CorrelatorSeries, d_embed: usize) -> Result<Calibration> {
    if !baseline.random_init {
        return Err(Error::Calibration(format!(
            "baseline '{}' is not flagged random_init",
            baseline.model_label
        )));
    }
    if baseline.is_empty() {
        return Err(Error::Calibration("empty baseline series".into()));
    }
    if d_embed < 2 {
        return Err(Error::Calibration(format!("d_embed must be >= 2, got {d_embed}")));
    }
    let (argmin_layer, e_random) = argmin(&baseline.values);
    if !(e_random > 0.0 && e_random <= 1.0) {
        return Err(Error::Calibration(format!(
            "baseline minimum {e_random} (layer {argmin_layer}) outside (0, 1]"
        )));
    }

    let plateau = detect_plateau(&baseline.values, PLATEAU_WINDOW, PLATEAU_REL_TOL);
    let min_on_plateau = plateau.is_some_and(|p| argmin_layer >= p.start_layer);
    let mut warnings = Vec::new();
    match plateau {
        None => warnings.push("baseline series shows no plateau".to_owned()),
        Some(p) if !min_on_plateau => warnings.push(format!(
            "baseline minimum at layer {argmin_layer} precedes the plateau starting at layer {} (plateau value {:e})",
            p.start_layer, p.value
        )),
        Some(_) => {}
    }

    Ok(Calibration {
        e_random,
        d_embed,
        constant: e_random * (d_embed as f64 - 1.0),
        source_label: baseline.model_label.clone(),
        baseline_argmin_layer: argmin_layer,
        token_count: baseline.token_count,
        plateau,
        min_on_plateau,
        warnings,
    })
}

/// Averages `E_random` over several calibrations sharing `d_embed` (and the
/// token count, unless `allow_token_mismatch`).
pub fn combine_calibrations(
    calibrations: &[Calibration],
    allow_token_mismatch: bool,
) -> Result<Calibration> {
    let first = calibrations
        .first()
        .ok_or_else(|| Error::Calibration("no baselines to combine".into()))?;
    if let Some(c) = calibrations.iter().find(|c| c.d_embed != first.d_embed) {
        return Err(Error::Calibration(format!(
            "baselines disagree on d_embed: {} vs {}",
            first.d_embed, c.d_embed
        )));
    }
    let mismatched = calibrations.iter().find(|c| c.token_count != first.token_count);
    if let (Some(c), false) = (mismatched, allow_token_mismatch) {
        return Err(Error::Calibration(format!(
            "baselines disagree on token count: {} vs {}",
            first.token_count, c.token_count
        )));
    }
    if calibrations.len() == 1 {
        return Ok(first.clone());
    }
    let e_random =
        calibrations.iter().map(|c| c.e_random).sum::<f64>() / calibrations.len() as f64;
    let labels: Vec<&str> = calibrations.iter().map(|c| c.source_label.as_str()).collect();
    Ok(Calibration {
        e_random,
        d_embed: first.d_embed,
        constant: e_random * (first.d_embed as f64 - 1.0),
        source_label: labels.join("+"),
        baseline_argmin_layer: first.baseline_argmin_layer,
        token_count: first.token_count,
        plateau: first.plateau,
        min_on_plateau: calibrations.iter().all(|c| c.min_on_plateau),
        warnings: calibrations.iter().flat_map(|c| c.warnings.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateOptions {
    /// Accept a baseline measured on a different number of tokens.
    pub allow_token_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub e_model: f64,
    pub e_machine: f64,
    pub d_model: f64,
    pub d_machine: f64,
    /// Layer where the series attains `e_model`.
    pub working_layer: usize,
    pub calibration: Calibration,
    /// Set when the working layer is the first or last layer.
    pub suspicious_working_layer: bool,
}

/// `constant / e + 1`, written as `(d_embed − 1) · (e_random / e) + 1` so that
/// `e == e_random` returns `d_embed` exactly.
pub fn dimension_from_correlator(calibration: &Calibration, e: f64) -> Result<f64> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::Estimation(format!(
            "correlator {e} must be positive for a dimension estimate"
        )));
    }
    Ok((calibration.d_embed as f64 - 1.0) * (calibration.e_random / e) + 1.0)
}

/// Extracts `d_model` (series minimum) and `d_machine` (final layer).
pub fn estimate_dimensions(
    series: &CorrelatorSeries,
    calibration: &Calibration,
    options: EstimateOptions,
) -> Result<DimensionEstimate> {
    if series.embed_dim != calibration.d_embed {
        return Err(Error::Calibration(format!(
            "model d_embed {} differs from calibration d_embed {}",
            series.embed_dim, calibration.d_embed
        )));
    }
    if series.token_count != calibration.token_count && !options.allow_token_mismatch {
        return Err(Error::Calibration(format!(
            "model has {} tokens, baseline {}; pass --allow-mismatch to combine them",
            series.token_count, calibration.token_count
        )));
    }
    let d_model = dimension_from_correlator(calibration, series.e_model)?;
    let d_machine = dimension_from_correlator(calibration, series.e_final)?;
    let last = series.len().saturating_sub(1);
    Ok(DimensionEstimate {
        e_model: series.e_model,
        e_machine: series.e_final,
        d_model,
        d_machine,
        working_layer: series.argmin_layer,
        calibration: calibration.clone(),
        suspicious_working_layer: series.argmin_layer == 0 || series.argmin_layer == last,
    })
}
