//! Random hierarchies and a breadth-first routing oracle built from the
//! same edge list, independent of the tree's own parent/depth tables.

#![allow(dead_code)]

use std::collections::VecDeque;

use locsim::topology::{Cost, HierarchyTree, NodeId, TreeBuilder};
use proptest::prelude::*;

#[derive(Clone, Debug)]
pub struct TreeSpec {
    pub roots: usize,
    /// `(parent, child, cost)` by node index; roots are `0..roots`.
    pub edges: Vec<(usize, usize, Cost)>,
    pub bus_cost: Cost,
    pub nodes: usize,
}

impl TreeSpec {
    pub fn name(i: usize) -> String {
        format!("n{i}")
    }

    pub fn build(&self) -> HierarchyTree {
        let mut b = TreeBuilder::new();
        for r in 0..self.roots {
            b.root(&Self::name(r));
        }
        for &(p, c, w) in &self.edges {
            b.edge(&Self::name(p), &Self::name(c), w);
        }
        b.bus_cost(self.bus_cost);
        b.build().expect("generated tree is well formed")
    }
}

/// Every internal node gets 2 or 3 children; at most `max_nodes` nodes.
pub fn tree_spec(max_nodes: usize, weighted: bool) -> impl Strategy<Value = TreeSpec> {
    let costs = if weighted { 1..=4u64 } else { 1..=1u64 };
    (
        2..=4usize,
        prop::collection::vec((any::<prop::sample::Index>(), 2..=3usize), 0..40),
        prop::collection::vec(costs.clone(), 64),
        costs,
    )
        .prop_map(move |(roots, expansions, weights, bus_cost)| {
            let mut leaves: Vec<usize> = (0..roots).collect();
            let mut nodes = roots;
            let mut edges = Vec::new();
            let grow = |parent: usize, arity: usize, nodes: &mut usize, leaves: &mut Vec<usize>, edges: &mut Vec<_>| {
                for _ in 0..arity {
                    let c = *nodes;
                    *nodes += 1;
                    edges.push((parent, c, weights[c % weights.len()]));
                    leaves.push(c);
                }
            };
            for r in 0..roots {
                leaves.retain(|&l| l != r);
                grow(r, 2, &mut nodes, &mut leaves, &mut edges);
            }
            for (pick, arity) in expansions {
                if nodes + arity > max_nodes {
                    break;
                }
                let i = pick.index(leaves.len());
                let p = leaves.swap_remove(i);
                grow(p, arity, &mut nodes, &mut leaves, &mut edges);
            }
            TreeSpec {
                roots,
                edges,
                bus_cost,
                nodes,
            }
        })
}

/// Adjacency over tree edges plus the bus chain.
pub struct Oracle {
    adj: Vec<Vec<(usize, Cost)>>,
    parent: Vec<Option<usize>>,
}

impl Oracle {
    pub fn new(spec: &TreeSpec) -> Self {
        let mut adj = vec![Vec::new(); spec.nodes];
        let mut parent = vec![None; spec.nodes];
        for &(p, c, w) in &spec.edges {
            adj[p].push((c, w));
            adj[c].push((p, w));
            parent[c] = Some(p);
        }
        for r in 1..spec.roots {
            adj[r - 1].push((r, spec.bus_cost));
            adj[r].push((r - 1, spec.bus_cost));
        }
        Self { adj, parent }
    }

    /// Breadth-first path from `a` to `b`, both included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut prev = vec![usize::MAX; self.adj.len()];
        prev[a] = a;
        let mut q = VecDeque::from([a]);
        while let Some(x) = q.pop_front() {
            if x == b {
                break;
            }
            for &(y, _) in &self.adj[x] {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    q.push_back(y);
                }
            }
        }
        let mut out = vec![b];
        let mut x = b;
        while x != a {
            x = prev[x];
            out.push(x);
        }
        out.reverse();
        out
    }

    pub fn cost(&self, a: usize, b: usize) -> Cost {
        self.path(a, b)
            .windows(2)
            .map(|w| self.adj[w[0]].iter().find(|(y, _)| *y == w[1]).unwrap().1)
            .sum()
    }

    fn chain(&self, mut x: usize) -> Vec<usize> {
        let mut out = vec![x];
        while let Some(p) = self.parent[x] {
            out.push(p);
            x = p;
        }
        out
    }

    /// First node of `a`'s ancestor chain that is also on `b`'s.
    pub fn lca(&self, a: usize, b: usize) -> Option<usize> {
        let cb = self.chain(b);
        self.chain(a).into_iter().find(|x| cb.contains(x))
    }
}

pub fn ids(tree: &HierarchyTree, n: usize) -> Vec<NodeId> {
    (0..n).map(|i| tree.id(&TreeSpec::name(i)).unwrap()).collect()
}
