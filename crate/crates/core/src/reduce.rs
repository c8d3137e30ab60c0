//! Deterministic parallel reductions.
//!
//! Ranges are split at fixed midpoints down to a fixed leaf size, so the
//! summation tree depends only on the range, never on how many workers run.

use std::ops::Range;

pub(crate) const LEAF: u64 = 1 << 11;

pub(crate) fn tree_reduce<A, L, C>(range: Range<u64>, leaf: &L, combine: &C) -> A
where
    A: Send,
    L: Fn(Range<u64>) -> A + Sync,
    C: Fn(A, A) -> A + Sync,
{
    if range.end - range.start <= LEAF {
        return leaf(range);
    }
    let mid = range.start + (range.end - range.start) / 2;
    let (a, b) = rayon::join(
        || tree_reduce(range.start..mid, leaf, combine),
        || tree_reduce(mid..range.end, leaf, combine),
    );
    combine(a, b)
}

/// Elementwise sum of two equally long accumulators.
pub(crate) fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}
