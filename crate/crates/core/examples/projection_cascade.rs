// SPDX-License-Identifier: MIT OR Apache-2.0

//! Compression cascade: each step removes random normals from every token,
//! drawn outside the span of the other tokens. The correlator grows as
//! `(d − 1) / (d − 1 + Δd)` while `E · (d − 1)` stays put.
//!
//! ```text
//! cargo run --release --example projection_cascade -- [seeds] [--fully-random]
//! ```

use layergeo::{run_campaign, CascadeConfig, NormalMode};

fn main() -> layergeo::Result<()> {
    let seeds = std::env::args().skip(1).find_map(|s| s.parse().ok()).unwrap_or(4);
    let mode = if std::env::args().any(|a| a == "--fully-random") {
        NormalMode::FullyRandom
    } else {
        NormalMode::Complement
    };
    let config = CascadeConfig {
        embed_dim: 512,
        token_count: 64,
        target_correlator: 0.05,
        schedule: vec![64, 64, 64],
        seeds,
        mode,
    };
    let runs = run_campaign(&config, &config.seed_list(0))?;

    println!("{mode:?} normals, {seeds} seeds");
    println!("step    d   E_measured  ratio_meas  ratio_pred  E*(d-1)");
    let avg = |f: &dyn Fn(&layergeo::CascadeResult) -> f64| {
        runs.iter().map(f).sum::<f64>() / runs.len() as f64
    };
    for step in 0..runs[0].e_series.len() {
        let ratio = |v: &[f64]| if step == 0 { f64::NAN } else { v[step - 1] };
        println!(
            "{step:>4} {:>4}  {:>10.6}  {:>10.4}  {:>10.4}  {:>8.4}",
            runs[0].dims[step],
            avg(&|r| r.e_series[step]),
            avg(&|r| ratio(&r.measured_ratios)),
            ratio(&runs[0].predicted_ratios),
            avg(&|r| r.conservation_series[step]),
        );
    }
    let drift = runs.iter().map(|r| r.conservation_drift()).fold(0.0, f64::max);
    println!("worst conservation drift {drift:.3}");
    Ok(())
}
