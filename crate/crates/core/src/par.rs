//! Data-parallel helpers with a sequential fallback.
//!
//! All helpers return results in index order and never reduce across
//! workers, so callers fold partial results sequentially and get the same
//! bits whether or not rayon is in use.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) const MODE: &str = "rayon";
#[cfg(not(feature = "parallel"))]
pub(crate) const MODE: &str = "sequential";

/// Rows per partial sum. Fixed so that reduction order never depends on
/// the thread count.
pub(crate) const REDUCE_CHUNK: usize = 2048;

/// `f(i)` for every `i` in `0..n`, collected in order.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
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

/// Splits `0..n` into consecutive ranges of `chunk` indices and maps each.
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_indices(count, |c| f(c * chunk..((c + 1) * chunk).min(n)))
}

/// Calls `f` on every item. Items are independent, typically disjoint
/// mutable views.
pub(crate) fn for_each_owned<T, F>(items: Vec<T>, f: F)
where
    T: Send,
    F: Fn(T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().for_each(f);
    }
}

/// Calls `f(row, out_row)` for every `width`-wide row of `out`.
pub(crate) fn for_each_row_mut<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let ranges = map_chunks(10, 4, |r| r);
        assert_eq!(ranges, vec![0..4, 4..8, 8..10]);
        assert!(map_chunks(0, 4, |r| r).is_empty());
    }

    #[test]
    fn rows_are_visited_once() {
        let mut out = vec![0.0; 6];
        for_each_row_mut(&mut out, 2, |i, row| {
            row[0] = i as f64;
            row[1] = -(i as f64);
        });
        assert_eq!(out, vec![0.0, -0.0, 1.0, -1.0, 2.0, -2.0]);
    }
}
