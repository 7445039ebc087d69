//! Thin layer over the optional data-parallel backend.
//!
//! With the `parallel` feature (default) the hot scans run on rayon; without
//! it they fall back to plain iterators. All helpers preserve input order so
//! results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, keeping the `Some` results in index order.
pub(crate) fn filter_map_range<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().filter_map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).filter_map(f).collect()
    }
}

/// Sequential twin of [`filter_map_range`], kept unconditionally for the
/// benchmark suite.
pub(crate) fn filter_map_range_seq<T, F>(n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> Option<T>,
{
    (0..n).filter_map(f).collect()
}

/// First index in `0..n` satisfying `pred`, deterministic under parallelism.
pub(crate) fn find_first_in_range<F>(n: u64, pred: F) -> Option<u64>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().find_first(|&i| pred(i))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).find(|&i| pred(i))
    }
}

/// Keep the elements of `items` satisfying `pred`, in order.
pub(crate) fn retain_filter<T, F>(items: Vec<T>, pred: F) -> Vec<T>
where
    T: Send,
    F: Fn(&T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().filter(|x| pred(x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().filter(|x| pred(x)).collect()
    }
}

/// Map over a vector in order.
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
