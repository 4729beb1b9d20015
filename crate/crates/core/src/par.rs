//! Thin parallel helpers. With the `std` feature work is spread over the
//! rayon pool; without it the same closures run serially. Every helper
//! produces results that depend only on the index, never on scheduling.

use alloc::vec::Vec;

#[cfg(feature = "std")]
use rayon::prelude::*;

/// Calls `f(i, chunk)` for each `chunk_len`-sized chunk of `out`.
pub fn for_each_chunk<F>(out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        out.par_chunks_mut(chunk_len)
            .with_min_len(16)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "std"))]
    {
        out.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// `(0..n).map(f).collect()`, in parallel when available.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..n).map(f).collect()
    }
}

/// Applies `f` to every element of `items` with its index.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
    #[cfg(not(feature = "std"))]
    {
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
}
