// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generates a synthetic dump, writes it to disk, reads it back and prints
//! its correlator series.
//!
//! ```text
//! cargo run --example synth_trace -- [out_dir]
//! ```

use layergeo::{
    correlator_series, generate_synthetic_trace, read_trace, write_trace, LayerGenerator,
    SyntheticSpec,
};

fn main() -> layergeo::Result<()> {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| tmp.path().join("trace"));

    let mut spec = SyntheticSpec::new(
        24,
        64,
        [12.0, 6.0, 3.0, 2.0, 4.0, 7.0]
            .map(|mean_norm| LayerGenerator::SharedMeanPlusNoise { mean_norm, sigma: 1.0 })
            .to_vec(),
    );
    spec.model_label = "dip-then-rise".into();
    spec.excluded_token_positions = vec![0];

    let trace = generate_synthetic_trace(&spec, 42)?;
    write_trace(&trace, &dir)?;
    let back = read_trace(&dir)?;
    assert_eq!(back.manifest, trace.manifest);

    println!("{}", serde_json::to_string_pretty(&back.manifest).expect("manifest"));
    let series = correlator_series(&back)?;
    for (i, (e, c)) in series.values.iter().zip(&series.cosine).enumerate() {
        println!("layer {i}: E = {e:.5}  cosine = {c:.5}");
    }
    println!("argmin layer {}", series.argmin_layer);
    Ok(())
}
