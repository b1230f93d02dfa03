// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo average of `cos²θ` between a uniform unit vector and a fixed
//! axis, against the exact `1/d` and the large-`d` form `1/(d − 1)`.
//!
//! ```text
//! cargo run --release --example hypersphere_oracle -- [samples]
//! ```

use layergeo::report::OracleRow;
use layergeo::mc_cos2_expectation;

fn main() -> layergeo::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    println!("     d     mc_mean      1/d          1/(d-1)      z     gap");
    for (i, d) in [2usize, 3, 10, 100, 1000].into_iter().enumerate() {
        let row = OracleRow::from(mc_cos2_expectation(d, samples, i as u64)?);
        println!(
            "{:>6}  {:.6e}  {:.6e}  {:.6e}  {:+.2}  {:.4}%",
            row.d,
            row.mc_mean,
            row.exact,
            row.asymptotic,
            row.z_score,
            100.0 * row.approx_rel_gap
        );
    }
    Ok(())
}
