// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command implementations and report emission.
//!
//! Every command writes plain data (CSV with a header row, LF endings, `.`
//! decimal separator, and pretty JSON) for external plotting. Files are
//! written to a temporary sibling and renamed into place. Floats in CSV use
//! 17 significant digits, so re-parsing reproduces the in-memory values.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actdump::{generate_synthetic_trace, read_trace, write_trace, SyntheticSpec};
use crate::dimensions::{
    calibrate, combine_calibrations, estimate_dimensions, DimensionEstimate, EstimateOptions,
};
use crate::dynamics::{
    asymptotic_cos2, exact_cos2, mc_cos2_expectation, run_campaign, CascadeConfig, CascadeResult,
    Cos2Estimate,
};
use crate::error::{Error, Result};
use crate::geometry::{correlator_series, layer_spectra, DEFAULT_CLIP};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `contents` to `path` atomically (temp file in the same directory, then rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Spec(format!("missing file {}", path.display())),
        _ => Error::io(path, e),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: usize,
    #[serde(rename = "E")]
    pub e: f64,
    pub cosine: f64,
    /// Present when spectra were requested.
    pub kappa: Option<f64>,
    pub num_clipped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub trace_path: String,
    pub calibration_path: Option<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model_label: String,
    pub records: Vec<LayerRecord>,
    pub argmin_layer: usize,
    pub e_model: f64,
    pub e_final: f64,
    pub clip_threshold: Option<f64>,
    pub dimensions: Option<DimensionEstimate>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    /// `series.csv`: `layer,E,cosine,kappa,num_clipped`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,E,cosine,kappa,num_clipped\n");
        for r in &self.records {
            let clipped = r.num_clipped.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.layer,
                fmt_f64(r.e),
                fmt_f64(r.cosine),
                fmt_opt(r.kappa),
                clipped
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub spectra: bool,
    pub clip: f64,
    pub out_dir: PathBuf,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            spectra: false,
            clip: DEFAULT_CLIP,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Computes the correlator series (and optionally per-layer spectra) of a
/// dump, writing `report.json` and `series.csv` into `options.out_dir`.
pub fn cmd_analyze(trace_path: &Path, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let trace = read_trace(trace_path)?;
    let series = correlator_series(&trace)?;
    let spectra = if options.spectra {
        Some(layer_spectra(&trace, options.clip)?)
    } else {
        None
    };
    let records = (0..series.len())
        .map(|i| LayerRecord {
            layer: i,
            e: series.values[i],
            cosine: series.cosine[i],
            kappa: spectra.as_ref().map(|s| s[i].condition_number),
            num_clipped: spectra.as_ref().map(|s| s[i].num_clipped),
        })
        .collect();
    let report = AnalysisReport {
        model_label: series.model_label.clone(),
        records,
        argmin_layer: series.argmin_layer,
        e_model: series.e_model,
        e_final: series.e_final,
        clip_threshold: options.spectra.then_some(options.clip),
        dimensions: None,
        provenance: Provenance {
            trace_path: trace_path.display().to_string(),
            calibration_path: None,
            tool_version: TOOL_VERSION.to_owned(),
            seed: None,
        },
    };
    write_json(&options.out_dir.join("report.json"), &report)?;
    write_atomic(&options.out_dir.join("series.csv"), report.to_csv().as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct DimsOptions {
    pub allow_mismatch: bool,
    /// Extra baseline traces averaged with the primary one.
    pub extra_baselines: Vec<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for DimsOptions {
    fn default() -> Self {
        Self {
            allow_mismatch: false,
            extra_baselines: Vec::new(),
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsReport {
    pub estimate: DimensionEstimate,
    pub model_series: Vec<f64>,
    pub baseline_series: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

/// Calibrates on the baseline trace(s), estimates on the model trace and
/// writes `dims.json`.
pub fn cmd_dims(model_path: &Path, baseline_path: &Path, options: &DimsOptions) -> Result<DimsReport> {
    let model = read_trace(model_path)?;
    let model_series = correlator_series(&model)?;

    let mut calibrations = Vec::new();
    let mut baseline_series = Vec::new();
    for path in std::iter::once(baseline_path).chain(options.extra_baselines.iter().map(PathBuf::as_path)) {
        let trace = read_trace(path)?;
        if trace.manifest.embed_dim != model.manifest.embed_dim {
            return Err(Error::Calibration(format!(
                "baseline {} has d_embed {}, model has {}",
                path.display(),
                trace.manifest.embed_dim,
                model.manifest.embed_dim
            )));
        }
        let series = correlator_series(&trace)?;
        calibrations.push(calibrate(&series, trace.manifest.embed_dim)?);
        baseline_series.push(series.values);
    }
    let calibration = combine_calibrations(&calibrations, options.allow_mismatch)?;
    let estimate = estimate_dimensions(
        &model_series,
        &calibration,
        EstimateOptions {
            allow_token_mismatch: options.allow_mismatch,
        },
    )?;
    let report = DimsReport {
        estimate,
        model_series: model_series.values,
        baseline_series,
        provenance: Provenance {
            trace_path: model_path.display().to_string(),
            calibration_path: Some(
                std::iter::once(baseline_path)
                    .chain(options.extra_baselines.iter().map(PathBuf::as_path))
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            tool_version: TOOL_VERSION.to_owned(),
            seed: None,
        },
    };
    write_json(&options.out_dir.join("dims.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: CascadeConfig,
    pub runs: Vec<CascadeResult>,
    pub provenance: Provenance,
}

impl SimulationReport {
    /// Seed-averaged trajectory: `step,d,E_measured,ratio_measured,ratio_predicted,conservation`.
    /// Step 0 is the initial ensemble and leaves the ratio columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,d,E_measured,ratio_measured,ratio_predicted,conservation\n");
        let runs = self.runs.len() as f64;
        let mean = |f: &dyn Fn(&CascadeResult) -> f64| self.runs.iter().map(f).sum::<f64>() / runs;
        let first = &self.runs[0];
        for step in 0..first.e_series.len() {
            let (measured, predicted) = if step == 0 {
                (None, None)
            } else {
                (
                    Some(mean(&|r| r.measured_ratios[step - 1])),
                    Some(first.predicted_ratios[step - 1]),
                )
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                step,
                first.dims[step],
                fmt_f64(mean(&|r| r.e_series[step])),
                fmt_opt(measured),
                fmt_opt(predicted),
                fmt_f64(mean(&|r| r.conservation_series[step]))
            );
        }
        out
    }

    /// Per-seed rows with the same columns plus `seed`.
    pub fn runs_csv(&self) -> String {
        let mut out =
            String::from("seed,step,d,E_measured,ratio_measured,ratio_predicted,conservation\n");
        for r in &self.runs {
            for step in 0..r.e_series.len() {
                let (m, p) = if step == 0 {
                    (None, None)
                } else {
                    (Some(r.measured_ratios[step - 1]), Some(r.predicted_ratios[step - 1]))
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.seed,
                    step,
                    r.dims[step],
                    fmt_f64(r.e_series[step]),
                    fmt_opt(m),
                    fmt_opt(p),
                    fmt_f64(r.conservation_series[step])
                );
            }
        }
        out
    }
}

/// Runs the cascade campaign in `spec_path` with seeds `seed, seed + 1, ..`
/// and writes `cascade.csv`, `cascade_runs.csv` and `cascade.json`.
pub fn cmd_simulate(spec_path: &Path, seed: u64, out_dir: &Path) -> Result<SimulationReport> {
    let config: CascadeConfig = read_json(spec_path)?;
    config.validate()?;
    let runs = run_campaign(&config, &config.seed_list(seed))?;
    let report = SimulationReport {
        config,
        runs,
        provenance: Provenance {
            trace_path: spec_path.display().to_string(),
            calibration_path: None,
            tool_version: TOOL_VERSION.to_owned(),
            seed: Some(seed),
        },
    };
    write_atomic(&out_dir.join("cascade.csv"), report.to_csv().as_bytes())?;
    write_atomic(&out_dir.join("cascade_runs.csv"), report.runs_csv().as_bytes())?;
    write_json(&out_dir.join("cascade.json"), &report)?;
    Ok(report)
}

/// One row of the angular-average oracle table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub d: usize,
    pub mc_mean: f64,
    pub std_err: f64,
    /// `1/d`.
    pub exact: f64,
    /// `1/(d − 1)`.
    pub asymptotic: f64,
    /// `(mc_mean − exact) / std_err`.
    pub z_score: f64,
    /// `(asymptotic − exact) / exact`.
    pub approx_rel_gap: f64,
}

impl From<Cos2Estimate> for OracleRow {
    fn from(e: Cos2Estimate) -> Self {
        let exact = exact_cos2(e.dim);
        let asymptotic = asymptotic_cos2(e.dim);
        Self {
            d: e.dim,
            mc_mean: e.mean,
            std_err: e.std_err,
            exact,
            asymptotic,
            z_score: e.z_score(),
            approx_rel_gap: (asymptotic - exact) / exact,
        }
    }
}

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from("d,mc_mean,std_err,exact,asymptotic,z_score,approx_rel_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.d,
            fmt_f64(r.mc_mean),
            fmt_f64(r.std_err),
            fmt_f64(r.exact),
            fmt_f64(r.asymptotic),
            fmt_f64(r.z_score),
            fmt_f64(r.approx_rel_gap)
        );
    }
    out
}

/// Monte Carlo `E[cos²θ]` for each dimension, written to `oracle.csv`.
/// Dimension `d_list[i]` uses seed `seed + i`.
pub fn cmd_oracle(d_list: &[usize], samples: usize, seed: u64, out_dir: &Path) -> Result<Vec<OracleRow>> {
    if d_list.is_empty() {
        return Err(Error::Spec("no dimensions requested".into()));
    }
    let rows = d_list
        .iter()
        .enumerate()
        .map(|(i, &d)| mc_cos2_expectation(d, samples, seed.wrapping_add(i as u64)).map(OracleRow::from))
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&out_dir.join("oracle.csv"), oracle_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// Generates the synthetic trace described in `spec_path` into `out_dir`.
pub fn cmd_synth(spec_path: &Path, seed: u64, out_dir: &Path) -> Result<()> {
    let spec: SyntheticSpec = read_json(spec_path)?;
    let trace = generate_synthetic_trace(&spec, seed)?;
    write_trace(&trace, out_dir)
}

/// Parses a CSV produced by this module into rows of optional floats
/// (empty fields become `None`). Header row is skipped.
pub fn parse_csv(text: &str) -> Vec<Vec<Option<f64>>> {
    text.lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .map(|f| if f.is_empty() { None } else { f.parse().ok() })
                .collect()
        })
        .collect()
}
