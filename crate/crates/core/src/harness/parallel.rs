//! Order-preserving parallel map over indices.

/// Applies `f` to `0..n` and returns the results in index order.
///
/// `workers == 0` uses all available cores; `workers == 1` runs inline.
/// Without the `parallel` feature everything runs inline.
pub fn par_map<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 && n > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
        if let Ok(pool) = pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n).map(f).collect()
}
