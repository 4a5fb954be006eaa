//! Shared fixtures for the criterion benches.

use nalgebra::DMatrix;
use ruelle_core::symplin::{SymplecticMatrix, LieAlgebraElement};

/// A fixed, moderately hyperbolic element of `Sp(2n)`.
pub fn fixture_symplectic(n: usize) -> SymplecticMatrix {
    let dim = 2 * n;
    let s = DMatrix::from_fn(dim, dim, |i, j| {
        let k = (i * 7 + j * 7 + 3) % 11;
        0.1 * (k as f64 - 5.0) / 5.0
    });
    let s = (&s + s.transpose()) * 0.5;
    LieAlgebraElement::from_symmetric(&s)
        .and_then(|g| g.exp())
        .expect("fixture generator is symmetric")
}
