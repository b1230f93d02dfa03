// SPDX-License-Identifier: MIT OR Apache-2.0

//! Clipped Gram spectrum of tokens confined to a low-dimensional subspace.
//!
//! ```text
//! cargo run --example gram_spectrum -- [k]
//! ```

use layergeo::{generate_synthetic_trace, gram_spectrum, LayerGenerator, SyntheticSpec};

fn main() -> layergeo::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spec = SyntheticSpec::new(32, 64, vec![LayerGenerator::ConfinedSubspace { k }; 2]);
    let trace = generate_synthetic_trace(&spec, 0)?;
    let s = gram_spectrum(&trace.layers[0].matrix, 1e-8)?;

    println!("N = 32, d = 64, subspace dimension {k}");
    println!("clipped eigenvalues: {}", s.num_clipped);
    println!("condition number:    {:.3e}", s.condition_number);
    println!("leading eigenvalues:");
    for (i, l) in s.raw_eigenvalues.iter().take(k + 2).enumerate() {
        println!("  {i:>2}  {l:.6e}");
    }
    Ok(())
}
