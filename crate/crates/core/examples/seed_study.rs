// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seed sweep of the synthetic cascade and the dimension round trip.
//!
//! ```text
//! cargo run --release --example seed_study -- [seeds] [--round-trip-only]
//! ```

use layergeo::{
    calibrate, correlator_series, estimate_dimensions, generate_synthetic_trace, run_campaign,
    CascadeConfig, EstimateOptions, LayerGenerator, NormalMode, SyntheticSpec,
};
use rayon::prelude::*;

fn round_trip_specs(e0: f64, target: usize) -> (SyntheticSpec, SyntheticSpec) {
    let (n, d) = (64, 512);
    let mean_norm = (e0 * d as f64 / (1.0 - e0)).sqrt();
    let base = LayerGenerator::SharedMeanOrthogonalNoise { mean_norm, sigma: 1.0 };
    let mut baseline = SyntheticSpec::new(
        n,
        d,
        vec![base.clone(), LayerGenerator::CompressedFrom { layer: 0, target_dim: d }],
    );
    baseline.random_init = true;
    baseline.model_label = "baseline".into();
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
            compressed(2 * target),
            compressed(target),
        ],
    );
    (baseline, model)
}

fn main() -> layergeo::Result<()> {
    let seeds: u64 = std::env::args().skip(1).find_map(|s| s.parse().ok()).unwrap_or(20);

    if std::env::args().any(|a| a == "--round-trip-only") {
        return round_trip(seeds);
    }
    let config = CascadeConfig {
        embed_dim: 512,
        token_count: 64,
        target_correlator: 0.05,
        schedule: vec![64, 64, 64],
        seeds: seeds as usize,
        mode: NormalMode::Complement,
    };
    let runs = run_campaign(&config, &config.seed_list(0))?;
    let worst = |f: &dyn Fn(&layergeo::CascadeResult) -> f64| runs.iter().map(f).fold(0.0, f64::max);
    println!("cascade over {} seeds", runs.len());
    println!(
        "  worst ratio error   {:.4}",
        worst(&|r| r.ratio_errors().into_iter().fold(0.0, f64::max))
    );
    println!("  worst drift         {:.4}", worst(&|r| r.conservation_drift()));
    println!(
        "  worst numerator     {:.4}",
        worst(&|r| r.numerator_changes().into_iter().fold(0.0, f64::max))
    );

    round_trip(seeds)
}

fn round_trip(seeds: u64) -> layergeo::Result<()> {
    let target = 32;
    let (baseline, model) = round_trip_specs(0.005, target);
    let estimates: Vec<(f64, f64)> = (0..seeds * 10)
        .into_par_iter()
        .map(|seed| {
            let b = correlator_series(&generate_synthetic_trace(&baseline, seed)?)?;
            let m = correlator_series(&generate_synthetic_trace(&model, seed)?)?;
            let cal = calibrate(&b, 512)?;
            let est = estimate_dimensions(&m, &cal, EstimateOptions::default())?;
            Ok((est.d_model, est.d_machine))
        })
        .collect::<layergeo::Result<_>>()?;
    let rel = |v: f64, t: usize| (v / t as f64 - 1.0).abs();
    let mean = estimates.iter().map(|e| e.0).sum::<f64>() / estimates.len() as f64;
    let mean_machine = estimates.iter().map(|e| e.1).sum::<f64>() / estimates.len() as f64;
    println!("round trip over {} seeds (targets {} and {target})", estimates.len(), 2 * target);
    println!("  mean d_model        {mean:.3}");
    println!("  mean d_machine      {mean_machine:.3}");
    println!(
        "  worst d_model err   {:.4}",
        estimates.iter().map(|e| rel(e.0, 2 * target)).fold(0.0, f64::max)
    );
    println!(
        "  worst d_machine err {:.4}",
        estimates.iter().map(|e| rel(e.1, target)).fold(0.0, f64::max)
    );
    Ok(())
}
