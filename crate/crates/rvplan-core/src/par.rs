//! Data-parallel map helpers. With the `parallel` feature the work is
//! spread over a rayon pool; without it the same code runs sequentially.
//! Results are collected in input order either way, so outputs do not
//! depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indices<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, preserving element order.
#[cfg(feature = "parallel")]
pub fn map_slice<I: Sync, T: Send, F: Fn(&I) -> T + Sync + Send>(items: &[I], f: F) -> Vec<T> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<I, T, F: Fn(&I) -> T>(items: &[I], f: F) -> Vec<T> {
    items.iter().map(f).collect()
}

/// Runs `f` inside a worker pool bounded to `jobs` threads (0 means the
/// rayon default). Without the `parallel` feature `jobs` is ignored and
/// `f` runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R>(_jobs: usize, f: impl FnOnce() -> R) -> R {
    f()
}
