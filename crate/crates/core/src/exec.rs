//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these run on the rayon global
//! pool; without it they degrade to plain sequential iterators. Callers that
//! want to force a sequential run under the feature can install a one-thread
//! rayon pool around the call, which is what the benches do.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Sums `f` over `items`.
#[cfg(feature = "parallel")]
pub fn sum_u64<T, F>(items: &[T], f: F) -> u64
where
    T: Sync,
    F: Fn(&T) -> u64 + Sync + Send,
{
    items.par_iter().map(f).sum()
}

#[cfg(not(feature = "parallel"))]
pub fn sum_u64<T, F>(items: &[T], f: F) -> u64
where
    F: Fn(&T) -> u64,
{
    items.iter().map(f).sum()
}

/// Whether the crate was compiled with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
