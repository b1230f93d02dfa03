// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `analyze` and `dims` commands as library calls: writes a model and a
//! baseline dump, then emits `report.json`, `series.csv` and `dims.json`.
//!
//! ```text
//! cargo run --example analyze_trace -- [out_dir]
//! ```

use std::path::PathBuf;

use layergeo::report::{cmd_analyze, cmd_dims, AnalyzeOptions, DimsOptions};
use layergeo::{generate_synthetic_trace, write_trace, LayerGenerator, SyntheticSpec};

fn main() -> layergeo::Result<()> {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| tmp.path().to_path_buf());

    let model = SyntheticSpec::new(
        32,
        128,
        [16.0, 8.0, 4.0, 3.0, 5.0, 9.0]
            .map(|mean_norm| LayerGenerator::SharedMeanPlusNoise { mean_norm, sigma: 1.0 })
            .to_vec(),
    );
    let mut baseline = SyntheticSpec::new(
        32,
        128,
        vec![LayerGenerator::SharedMeanPlusNoise { mean_norm: 1.5, sigma: 1.0 }; 6],
    );
    baseline.random_init = true;

    let (model_dir, base_dir) = (out.join("model"), out.join("baseline"));
    write_trace(&generate_synthetic_trace(&model, 1)?, &model_dir)?;
    write_trace(&generate_synthetic_trace(&baseline, 2)?, &base_dir)?;

    let report = cmd_analyze(
        &model_dir,
        &AnalyzeOptions { spectra: true, out_dir: out.clone(), ..Default::default() },
    )?;
    print!("{}", report.to_csv());

    let dims = cmd_dims(
        &model_dir,
        &base_dir,
        &DimsOptions { out_dir: out.clone(), ..Default::default() },
    )?;
    let est = &dims.estimate;
    println!(
        "E_random {:.5} -> d_model {:.2} at layer {}, d_machine {:.2}",
        est.calibration.e_random, est.d_model, est.working_layer, est.d_machine
    );
    for w in &est.calibration.warnings {
        println!("warning: {w}");
    }
    println!("reports in {}", out.display());
    Ok(())
}
