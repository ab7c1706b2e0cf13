//! Shared fixtures for the criterion benchmarks.

use deft_core::zoo::synthetic_gradient;
use deft_core::RealMatrix;

/// Rank-16 signal plus 1% noise, the same family `deft bench` measures on.
pub fn gradient_fixture(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    synthetic_gradient(rows, cols, 16, 0.01, seed)
}
