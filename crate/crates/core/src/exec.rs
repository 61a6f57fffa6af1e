//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over rayon's pool;
//! without it they run sequentially. Every helper returns results in index
//! order, so callers that reduce sequentially get bit-identical output
//! regardless of the thread count or the feature setting.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
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

/// Fallible variant of [`map_indexed`]; the error with the lowest index wins.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Applies `f(i, chunk)` to consecutive `chunk_len`-sized chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Like [`for_each_chunk_mut`] but zips each chunk with one element of `aux`.
pub fn for_each_chunk_zip<T, A, F>(data: &mut [T], chunk_len: usize, aux: &mut [A], f: F)
where
    T: Send,
    A: Send,
    F: Fn(usize, &mut [T], &mut A) + Sync + Send,
{
    assert!(chunk_len > 0);
    assert_eq!(data.len() / chunk_len, aux.len());
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .zip(aux.par_iter_mut())
            .enumerate()
            .for_each(|(i, (c, a))| f(i, c, a));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .zip(aux.iter_mut())
            .enumerate()
            .for_each(|(i, (c, a))| f(i, c, a));
    }
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
