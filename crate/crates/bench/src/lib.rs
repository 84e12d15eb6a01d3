//! Shared fixtures for the benchmarks.

use lwgan_core::rng::{self, streams};
use lwgan_core::DatasetKind;
use ndarray::Array2;

/// `n` rows of a toy manifold drawn with `seed`.
pub fn toy_rows(kind: DatasetKind, n: usize, seed: u64) -> Array2<f64> {
    kind.generate(n, &mut rng::stream(seed, streams::DATA))
        .expect("n ≥ 1")
        .into_rows()
}
