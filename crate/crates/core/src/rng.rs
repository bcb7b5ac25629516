//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and selected by
//! a 64-bit stream id, so independent streams for rows, chunks or workers can
//! be derived from a single seed without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for the `row`-th sample of a model seeded with `seed`.
///
/// Rows drawn from their own streams are independent of thread count and
/// of the order in which rows are produced.
pub fn row_rng(seed: u64, row: u64) -> StreamRng {
    stream_rng(seed, row)
}

/// `n` rows of width `d`, row `i` filled by `fill` from `row_rng(seed, i)`,
/// computed in parallel. The output is independent of the thread count.
pub fn par_rows<F>(n: usize, d: usize, seed: u64, fill: F) -> Vec<Vec<f64>>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; d];
            fill(&mut row_rng(seed, i as u64), &mut row);
            row
        })
        .collect()
}
