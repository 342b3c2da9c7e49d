//! Execution helpers that switch between rayon and plain loops.
//!
//! Everything data-parallel in this crate funnels through these three
//! functions. Each closure either owns a disjoint `&mut` chunk or produces a
//! value collected in index order, so results are byte-identical whether the
//! `parallel` feature is on or off and regardless of how many worker threads
//! rayon happens to use. No unordered reductions live here on purpose.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(index, chunk)` over consecutive `chunk_len` slices of `data`.
/// `data.len()` must be a multiple of `chunk_len`.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert_eq!(data.len() % chunk_len.max(1), 0);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Runs `f(index, chunk_a, chunk_b)` over paired chunks of two slices that
/// split into the same number of pieces (e.g. the RGB and depth rows of one
/// image, or a per-output-channel weight block and its bias).
pub(crate) fn for_each_chunk_pair_mut<A, B, F>(
    a: &mut [A],
    a_chunk: usize,
    b: &mut [B],
    b_chunk: usize,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    debug_assert_eq!(a.len() / a_chunk.max(1), b.len() / b_chunk.max(1));
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(a_chunk)
        .zip(b.par_chunks_mut(b_chunk))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i, ca, cb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(a_chunk)
        .zip(b.chunks_mut(b_chunk))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i, ca, cb));
}

/// Maps `f` over `0..n` and collects the results in index order.
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

/// Like [`map_indexed`] but for fallible work: stops at the first error in
/// index order, so the reported failure does not depend on thread timing.
pub(crate) fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results = map_indexed(n, f);
    results.into_iter().collect()
}
