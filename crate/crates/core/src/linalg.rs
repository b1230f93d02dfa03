// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense helpers: Gram-Schmidt bases and seeded Gaussian draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative norm below which a column is treated as linearly dependent.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// `rows × cols` matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal basis of the column span of `columns`, by modified
/// Gram-Schmidt with one reorthogonalization pass. Columns whose residual
/// norm falls below `RANK_TOL` times their original norm are dropped, so the
/// returned column count is the numerical rank.
pub fn orthonormal_basis(columns: &DMatrix<f64>) -> DMatrix<f64> {
    extend_basis(&DMatrix::zeros(columns.nrows(), 0), columns)
}

/// Orthonormalizes `columns` against an existing orthonormal `basis` and
/// against each other. Only the new directions are returned.
pub fn extend_basis(basis: &DMatrix<f64>, columns: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = columns.nrows();
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(columns.ncols());
    for col in columns.column_iter() {
        let original = col.norm();
        if original == 0.0 {
            continue;
        }
        let mut v: DVector<f64> = col.into_owned();
        for _ in 0..2 {
            for b in basis.column_iter() {
                let c = b.dot(&v);
                v.axpy(-c, &b, 1.0);
            }
            for b in &accepted {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > RANK_TOL * original {
            accepted.push(v / norm);
        }
    }
    if accepted.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&accepted)
    }
}
