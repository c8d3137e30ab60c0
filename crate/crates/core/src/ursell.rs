//! Ursell coefficients by direct enumeration of connected graphs.

use std::collections::HashMap;

use parking_lot::RwLock;

/// Index of the pair `i < j` among the edges of the complete graph on `p`
/// vertices, in lexicographic pair order.
#[inline]
pub(crate) fn edge_index(i: usize, j: usize, p: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

fn connected(p: usize, edges: u32) -> bool {
    let mut adj = [0u8; 8];
    let mut e = 0;
    for i in 0..p {
        for j in i + 1..p {
            if edges >> e & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
            e += 1;
        }
    }
    let full = (1u16 << p) - 1;
    let mut seen: u16 = 1;
    let mut frontier: u16 = 1;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = u16::from(adj[v]) & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == full
}

/// `sum over connected spanning subgraphs G of the allowed graph of (-1)^{|E(G)|}`.
pub(crate) fn ursell_direct(p: usize, allowed: u32) -> i64 {
    assert!((1..=8).contains(&p));
    if p == 1 {
        return 1;
    }
    let mut total = 0i64;
    let mut sub = allowed;
    loop {
        if connected(p, sub) {
            total += if sub.count_ones() & 1 == 1 { -1 } else { 1 };
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & allowed;
    }
    total
}

/// Memo of Ursell coefficients keyed by `(p, overlap edge mask)`.
#[derive(Default)]
pub(crate) struct UrsellCache {
    memo: RwLock<HashMap<(usize, u32), i64>>,
}

impl UrsellCache {
    pub(crate) fn get(&self, p: usize, allowed: u32) -> i64 {
        if let Some(&c) = self.memo.read().get(&(p, allowed)) {
            return c;
        }
        let c = ursell_direct(p, allowed);
        self.memo.write().insert((p, allowed), c);
        c
    }
}
