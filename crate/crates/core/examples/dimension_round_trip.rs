// SPDX-License-Identifier: MIT OR Apache-2.0

//! Calibrates on a random-weight baseline and recovers the dimension of a
//! synthetic final layer whose tokens were compressed to `k` dimensions.
//!
//! ```text
//! cargo run --release --example dimension_round_trip -- [k]
//! ```

use layergeo::{
    calibrate, correlator_series, estimate_dimensions, generate_synthetic_trace, EstimateOptions,
    LayerGenerator, SyntheticSpec,
};

fn main() -> layergeo::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let (n, d, e0) = (64, 512, 0.005);
    let mean_norm = (e0 * d as f64 / (1.0 - e0)).sqrt();

    let full = LayerGenerator::SharedMeanOrthogonalNoise { mean_norm, sigma: 1.0 };
    let mut baseline = SyntheticSpec::new(n, d, vec![full; 3]);
    baseline.random_init = true;
    let compressed = |target_dim| LayerGenerator::CompressedOrthogonalNoise {
        mean_norm,
        sigma: 1.0,
        target_dim,
    };
    let model = SyntheticSpec::new(
        n,
        d,
        vec![
            LayerGenerator::SharedMeanPlusNoise { mean_norm: (d as f64).sqrt(), sigma: 1.0 },
            compressed(2 * k),
            compressed(k),
        ],
    );

    for seed in 0..5 {
        let cal = calibrate(&correlator_series(&generate_synthetic_trace(&baseline, seed)?)?, d)?;
        let series = correlator_series(&generate_synthetic_trace(&model, seed)?)?;
        let est = estimate_dimensions(&series, &cal, EstimateOptions::default())?;
        println!(
            "seed {seed}: E_random {:.5}  d_model {:6.2} (target {})  d_machine {:6.2} (target {k})",
            cal.e_random,
            est.d_model,
            2 * k,
            est.d_machine
        );
    }
    Ok(())
}
