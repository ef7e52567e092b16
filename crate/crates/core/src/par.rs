//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it every
//! helper degrades to the equivalent sequential iterator. Results are always
//! collected in input order, and reductions combine fixed-size chunks in a
//! fixed order, so outputs are bitwise independent of the thread count.

/// Chunk length used by [`chunked_map`] callers that reduce floating point
/// partial sums. Fixed so that rounding does not depend on the thread count.
pub const REDUCE_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `0..n` into consecutive ranges of `chunk` and maps each range.
pub fn chunked_map<R, F>(exec: Execution, n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    map_range(exec, n_chunks, |c| {
        let start = c * chunk;
        f(start..(start + chunk).min(n))
    })
}

/// Runs `f` inside a pool of `workers` threads. `workers == 0` uses the
/// global pool; without the `parallel` feature the count is ignored.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("could not build a {workers}-thread pool: {e}"),
        }
    }
    let _ = workers;
    f()
}
