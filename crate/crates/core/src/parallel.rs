//! Chunked map with a fixed partition, parallel when the `parallel` feature
//! is on. Results always come back in chunk order, so reductions over them
//! are bit-identical with and without threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_CHUNK: usize = 64;

/// Applies `f` to consecutive chunks of `items` and returns the per-chunk results in order.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk).map(f).collect()
    }
}

/// Applies `f` to the index range `0..n` split into fixed blocks.
pub fn map_ranges<R, F>(n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let blocks = n.div_ceil(chunk);
    let block = |b: usize| f(b * chunk..((b + 1) * chunk).min(n));
    #[cfg(feature = "parallel")]
    {
        (0..blocks).into_par_iter().map(block).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..blocks).map(block).collect()
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_preserve_order() {
        let items: Vec<u32> = (0..1000).collect();
        let sums = map_chunks(&items, 64, |c| c.iter().sum::<u32>());
        assert_eq!(sums.len(), 16);
        assert_eq!(sums[0], (0..64).sum::<u32>());
        assert_eq!(sums.iter().sum::<u32>(), (0..1000).sum::<u32>());
    }

    #[test]
    fn ranges_cover_everything() {
        let parts = map_ranges(10, 4, |r| r);
        assert_eq!(parts, vec![0..4, 4..8, 8..10]);
        assert!(map_ranges(0, 4, |r| r).is_empty());
    }
}
