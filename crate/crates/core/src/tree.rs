//! Uniform spanning trees of induced subgraphs and population-balanced
//! tree cuts. Shared by seed-plan construction and the recombination step.
use rand::Rng;

use crate::graph::DualGraph;

const NONE: usize = usize::MAX;

/// Subgraph induced by a node set, relabelled `0..len`.
pub(crate) struct Subgraph {
    pub nodes: Vec<usize>,
    pub adj: Vec<Vec<usize>>,
    pub pops: Vec<f64>,
}

impl Subgraph {
    /// `scratch` must have length `g.n()` and be filled with `usize::MAX`;
    /// it is restored before returning.
    pub fn induced(g: &DualGraph, nodes: Vec<usize>, scratch: &mut [usize]) -> Self {
        for (local, &v) in nodes.iter().enumerate() {
            scratch[v] = local;
        }
        let adj = nodes
            .iter()
            .map(|&v| {
                g.neighbors(v)
                    .iter()
                    .filter_map(|&w| (scratch[w] != NONE).then_some(scratch[w]))
                    .collect()
            })
            .collect();
        let pops = nodes.iter().map(|&v| g.pop(v)).collect();
        for &v in &nodes {
            scratch[v] = NONE;
        }
        Subgraph { nodes, adj, pops }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_pop(&self) -> f64 {
        self.pops.iter().sum()
    }
}

/// A rooted spanning tree stored as parent pointers plus a BFS order
/// (parents precede children).
pub(crate) struct SpanningTree {
    parent: Vec<usize>,
    order: Vec<usize>,
}

/// Draws a uniformly random spanning tree with Wilson's loop-erased random
/// walk. The subgraph must be connected.
pub(crate) fn wilson<R: Rng>(sub: &Subgraph, rng: &mut R) -> SpanningTree {
    let n = sub.len();
    let mut in_tree = vec![false; n];
    let mut next = vec![NONE; n];
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let nbrs = &sub.adj[u];
            next[u] = nbrs[rng.random_range(0..nbrs.len())];
            u = next[u];
        }
        // Following `next` from `start` now traces the loop-erased path.
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    next[root] = NONE;

    let mut children_start = vec![0usize; n + 1];
    for &p in &next {
        if p != NONE {
            children_start[p + 1] += 1;
        }
    }
    for i in 0..n {
        children_start[i + 1] += children_start[i];
    }
    let mut fill = children_start.clone();
    let mut children = vec![0usize; n.saturating_sub(1)];
    for (v, &p) in next.iter().enumerate() {
        if p != NONE {
            children[fill[p]] = v;
            fill[p] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        order.extend_from_slice(&children[children_start[u]..children_start[u + 1]]);
    }
    debug_assert_eq!(order.len(), n);
    SpanningTree {
        parent: next,
        order,
    }
}

impl SpanningTree {
    /// Population of the subtree hanging below each node.
    pub fn subtree_pops(&self, pops: &[f64]) -> Vec<f64> {
        let mut acc = pops.to_vec();
        for &v in self.order.iter().rev() {
            let p = self.parent[v];
            if p != NONE {
                acc[p] += acc[v];
            }
        }
        acc
    }

    /// Nodes (local labels) whose removal of the edge to their parent
    /// separates a side accepted by `accept(subtree_pop, rest_pop)`.
    pub fn cuts_where<F>(&self, pops: &[f64], mut accept: F) -> Vec<usize>
    where
        F: FnMut(f64, f64) -> bool,
    {
        let sub = self.subtree_pops(pops);
        let total = sub[self.order[0]];
        self.order[1..]
            .iter()
            .copied()
            .filter(|&v| accept(sub[v], total - sub[v]))
            .collect()
    }

    /// Marks the subtree rooted at `v`.
    pub fn subtree_mask(&self, v: usize) -> Vec<bool> {
        let n = self.parent.len();
        let mut mask = vec![false; n];
        mask[v] = true;
        // BFS order lists every ancestor before its descendants.
        for &u in &self.order {
            let p = self.parent[u];
            if p != NONE && mask[p] {
                mask[u] = true;
            }
        }
        mask
    }

    #[cfg(test)]
    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|&&p| p != NONE).count()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::{make_grid, GridSpec};

    fn whole(g: &DualGraph) -> Subgraph {
        let mut scratch = vec![NONE; g.n()];
        Subgraph::induced(g, (0..g.n()).collect(), &mut scratch)
    }

    #[test]
    fn wilson_produces_spanning_trees() {
        let g = make_grid(&GridSpec::uniform(6, 5)).unwrap();
        let sub = whole(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = wilson(&sub, &mut rng);
            assert_eq!(t.edge_count(), g.n() - 1);
            assert_eq!(t.order.len(), g.n());
            for (v, &p) in t.parent.iter().enumerate() {
                if p != NONE {
                    assert!(sub.adj[v].contains(&p));
                }
            }
        }
    }

    #[test]
    fn wilson_is_uniform_on_a_square() {
        // The 4-cycle has exactly 4 spanning trees.
        let g = make_grid(&GridSpec::uniform(2, 2)).unwrap();
        let sub = whole(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
        let draws = 40_000;
        for _ in 0..draws {
            let t = wilson(&sub, &mut rng);
            let mut edges: Vec<_> = t
                .parent
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != NONE)
                .map(|(v, &p)| (v.min(p), v.max(p)))
                .collect();
            edges.sort();
            *counts.entry(edges).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);
        for &c in counts.values() {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.015, "{freq}");
        }
    }

    #[test]
    fn subtree_mask_matches_pops() {
        let g = make_grid(&GridSpec::uniform(4, 4)).unwrap();
        let sub = whole(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = wilson(&sub, &mut rng);
        let sp = t.subtree_pops(&sub.pops);
        for v in 0..sub.len() {
            let mask = t.subtree_mask(v);
            assert_eq!(mask.iter().filter(|&&m| m).count() as f64, sp[v]);
        }
        let cuts = t.cuts_where(&sub.pops, |a, b| a == 8.0 && b == 8.0);
        for v in cuts {
            assert_eq!(sp[v], 8.0);
        }
    }
}
