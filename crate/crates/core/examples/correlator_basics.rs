// SPDX-License-Identifier: MIT OR Apache-2.0

//! Correlator and mean cosine similarity on hand-built token sets.
//!
//! ```text
//! cargo run --example correlator_basics
//! ```

use layergeo::{correlator, mean_cosine_similarity};
use nalgebra::DMatrix;

fn main() -> layergeo::Result<()> {
    let cases = [
        ("identical", DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0])),
        ("orthogonal", DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])),
        ("(1,0) and (1,1)", DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])),
        ("antipodal", DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0])),
    ];
    for (name, m) in &cases {
        println!(
            "{name:>16}: E = {:+.6}  cosine = {:+.6}",
            correlator(m, &[])?,
            mean_cosine_similarity(m, &[])?
        );
    }

    // A BOS-like outlier row dominates the norms; excluding it restores the
    // geometry of the remaining tokens.
    let m = DMatrix::from_row_slice(3, 2, &[50.0, 0.0, 1.0, 1.0, 1.0, 0.9]);
    println!("with outlier row: E = {:.4}", correlator(&m, &[])?);
    println!("row 0 excluded:   E = {:.4}", correlator(&m, &[0])?);
    Ok(())
}
