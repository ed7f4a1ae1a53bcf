//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled the helpers fan work out over the
//! rayon thread pool; without it they run on the calling thread. Callers
//! only pass pure per-index closures, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every index in `0..n` and collects results in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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
