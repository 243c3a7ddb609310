//! Data-parallel helpers over basis-index chunks.
//!
//! Chunking is fixed (`CHUNK` elements) and partial reductions are combined
//! in chunk order, so results do not depend on the number of worker threads.

pub(crate) const CHUNK: usize = 1 << 12;

/// Calls `f(offset, chunk)` for every `CHUNK`-sized piece of `out`.
pub(crate) fn for_each_chunk_mut<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if out.len() > CHUNK {
            out.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| f(c * CHUNK, chunk));
            return;
        }
    }
    for (c, chunk) in out.chunks_mut(CHUNK).enumerate() {
        f(c * CHUNK, chunk);
    }
}

/// Like [`for_each_chunk_mut`] over two equally long slices in lockstep.
pub(crate) fn for_each_chunk_mut2<A, B, F>(a: &mut [A], b: &mut [B], f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Send + Sync,
{
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if a.len() > CHUNK {
            a.par_chunks_mut(CHUNK)
                .zip(b.par_chunks_mut(CHUNK))
                .enumerate()
                .for_each(|(c, (ca, cb))| f(c * CHUNK, ca, cb));
            return;
        }
    }
    for (c, (ca, cb)) in a.chunks_mut(CHUNK).zip(b.chunks_mut(CHUNK)).enumerate() {
        f(c * CHUNK, ca, cb);
    }
}

/// Ordered sum of per-chunk partial results over `0..len`.
pub(crate) fn chunked_sum<R, F>(len: usize, zero: R, f: F) -> R
where
    R: Send + Copy + std::ops::Add<Output = R>,
    F: Fn(std::ops::Range<usize>) -> R + Send + Sync,
{
    let n_chunks = len.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(len);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if n_chunks > 1 {
            let partials: Vec<R> = (0..n_chunks).into_par_iter().map(|c| f(range(c))).collect();
            return partials.into_iter().fold(zero, |a, b| a + b);
        }
    }
    (0..n_chunks).map(|c| f(range(c))).fold(zero, |a, b| a + b)
}

/// Evaluates `f` for `0..n` (in parallel when enabled) and returns the
/// results in index order.
pub(crate) fn map_ordered<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if n > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}
