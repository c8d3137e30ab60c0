//! Enumeration of connected vertex subsets (ESU), used for block-connected
//! hypergraphs and for connected polymer clusters.
//!
//! Every connected subset whose least vertex is the root is produced exactly
//! once. Each vertex carries a bitmask (its image support); a branch is cut as
//! soon as the union of masks exceeds the support cap, which is valid because
//! the union only grows.

use std::ops::ControlFlow;

pub(crate) struct VertexGraph<'a> {
    pub adjacency: &'a [Vec<usize>],
    pub masks: &'a [u64],
}

pub(crate) struct EsuLimits {
    pub max_size: usize,
    pub max_support: u32,
}

struct State<'a, F> {
    graph: &'a VertexGraph<'a>,
    limits: &'a EsuLimits,
    root: usize,
    cover: Vec<u32>,
    subset: Vec<usize>,
    visit: F,
}

impl<F> State<'_, F>
where
    F: FnMut(&[usize], u64) -> ControlFlow<()>,
{
    fn mark(&mut self, v: usize, delta: i32) {
        self.cover[v] = self.cover[v].wrapping_add_signed(delta);
        for &u in &self.graph.adjacency[v] {
            self.cover[u] = self.cover[u].wrapping_add_signed(delta);
        }
    }

    fn extend(&mut self, mut ext: Vec<usize>, mask: u64) -> ControlFlow<()> {
        (self.visit)(&self.subset, mask)?;
        if self.subset.len() == self.limits.max_size {
            return ControlFlow::Continue(());
        }
        while let Some(w) = ext.pop() {
            let new_mask = mask | self.graph.masks[w];
            if new_mask.count_ones() > self.limits.max_support {
                continue;
            }
            let mut next = ext.clone();
            for &u in &self.graph.adjacency[w] {
                if u > self.root && self.cover[u] == 0 {
                    next.push(u);
                }
            }
            self.subset.push(w);
            self.mark(w, 1);
            let flow = self.extend(next, new_mask);
            self.mark(w, -1);
            self.subset.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Calls `visit(subset, union_mask)` for every connected subset whose least
/// vertex is `root`, within the limits. Returning `Break` stops enumeration.
pub(crate) fn for_each_connected<F>(
    graph: &VertexGraph<'_>,
    root: usize,
    limits: &EsuLimits,
    visit: F,
) -> ControlFlow<()>
where
    F: FnMut(&[usize], u64) -> ControlFlow<()>,
{
    let mask = graph.masks[root];
    if limits.max_size == 0 || mask.count_ones() > limits.max_support {
        return ControlFlow::Continue(());
    }
    let mut state = State {
        graph,
        limits,
        root,
        cover: vec![0; graph.adjacency.len()],
        subset: vec![root],
        visit,
    };
    state.mark(root, 1);
    let ext: Vec<usize> = graph.adjacency[root]
        .iter()
        .copied()
        .filter(|&u| u > root)
        .collect();
    state.extend(ext, mask)
}
