//! Data-parallel execution shim.
//!
//! With the `parallel` feature (default) independent tasks run on the rayon
//! pool; without it the same tasks run sequentially. Outputs are collected in
//! task order and every task derives its own RNG substream, so results are
//! bit-identical across both modes and any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to 0..n, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
