use std::collections::HashMap;
use std::fmt;

use super::TopologyError;

/// Identifier of a location register in a [`HierarchyTree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Cost of traversing one link, in abstract cost units (hops by default).
pub type Cost = u64;

/// Accumulates roots and parent/child edges, then validates them into a
/// [`HierarchyTree`].
#[derive(Clone, Debug, Default)]
pub struct TreeBuilder {
    names: Vec<String>,
    by_name: HashMap<String, NodeId>,
    roots: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId, Cost)>,
    bus_cost: Option<Cost>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = NodeId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Appends a root to the end of the bus.
    pub fn root(&mut self, name: &str) -> &mut Self {
        let id = self.intern(name);
        self.roots.push(id);
        self
    }

    pub fn edge(&mut self, parent: &str, child: &str, cost: Cost) -> &mut Self {
        let p = self.intern(parent);
        let c = self.intern(child);
        self.edges.push((p, c, cost));
        self
    }

    /// Cost of every bus link between adjacent roots (default 1).
    pub fn bus_cost(&mut self, cost: Cost) -> &mut Self {
        self.bus_cost = Some(cost);
        self
    }

    /// Every structural problem with the declared tree, in a stable order.
    pub fn diagnose(&self) -> Vec<TopologyError> {
        let n = self.names.len();
        let mut issues = Vec::new();
        if self.roots.is_empty() {
            issues.push(TopologyError::NoRoots);
        }
        let mut is_root = vec![false; n];
        for &r in &self.roots {
            if is_root[r.index()] {
                issues.push(TopologyError::DuplicateRoot(self.names[r.index()].clone()));
            }
            is_root[r.index()] = true;
        }
        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for &(p, c, _) in &self.edges {
            if p == c {
                issues.push(TopologyError::Cycle(self.names[c.index()].clone()));
                continue;
            }
            if is_root[c.index()] {
                issues.push(TopologyError::RootHasParent(self.names[c.index()].clone()));
                continue;
            }
            if parent[c.index()].is_some() {
                issues.push(TopologyError::MultipleParents(self.names[c.index()].clone()));
                continue;
            }
            parent[c.index()] = Some(p);
            children[p.index()].push(c);
        }
        // Reachability from the roots also rules out cycles: a cycle can never
        // contain a root, so its members are unreachable.
        let mut seen = vec![false; n];
        let mut stack: Vec<NodeId> = self.roots.clone();
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut seen[x.index()], true) {
                continue;
            }
            stack.extend(children[x.index()].iter().copied());
        }
        for (i, name) in self.names.iter().enumerate() {
            if !seen[i] {
                issues.push(TopologyError::Disconnected(name.clone()));
            }
        }
        for (i, kids) in children.iter().enumerate() {
            if kids.len() == 1 {
                issues.push(TopologyError::MinChildren(self.names[i].clone()));
            }
        }
        issues
    }

    pub fn build(self) -> Result<HierarchyTree, TopologyError> {
        if let Some(first) = self.diagnose().into_iter().next() {
            return Err(first);
        }
        let n = self.names.len();
        let mut parent = vec![None; n];
        let mut up_cost = vec![0; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c, cost) in &self.edges {
            parent[c.index()] = Some(p);
            up_cost[c.index()] = cost;
            children[p.index()].push(c);
        }
        let mut depth = vec![0u32; n];
        let mut root_of = vec![NodeId(0); n];
        let mut bus_pos = vec![None; n];
        for (pos, &r) in self.roots.iter().enumerate() {
            bus_pos[r.index()] = Some(pos);
            let mut stack = vec![(r, 0u32)];
            while let Some((x, d)) = stack.pop() {
                depth[x.index()] = d;
                root_of[x.index()] = r;
                for &c in children[x.index()].iter().rev() {
                    stack.push((c, d + 1));
                }
            }
        }
        let leaves = (0..n as u32)
            .map(NodeId)
            .filter(|x| children[x.index()].is_empty())
            .collect();
        Ok(HierarchyTree {
            bus_cost: self.bus_cost.unwrap_or(1),
            names: self.names,
            by_name: self.by_name,
            parent,
            up_cost,
            children,
            roots: self.roots,
            bus_pos,
            depth,
            root_of,
            leaves,
        })
    }
}

/// Tree of location registers whose roots are joined by a linear bus.
///
/// Leaves are zone databases; internal nodes are directories. The routing
/// graph is the tree edges plus the bus links between adjacent roots, so
/// exactly one simple path joins any two registers.
#[derive(Clone, Debug)]
pub struct HierarchyTree {
    names: Vec<String>,
    by_name: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    up_cost: Vec<Cost>,
    children: Vec<Vec<NodeId>>,
    roots: Vec<NodeId>,
    bus_pos: Vec<Option<usize>>,
    bus_cost: Cost,
    depth: Vec<u32>,
    root_of: Vec<NodeId>,
    leaves: Vec<NodeId>,
}

impl HierarchyTree {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn contains(&self, x: NodeId) -> bool {
        x.index() < self.names.len()
    }

    fn check(&self, x: NodeId) -> Result<(), TopologyError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(TopologyError::UnknownNode(x.to_string()))
        }
    }

    pub fn name(&self, x: NodeId) -> &str {
        &self.names[x.index()]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    /// Like [`id`](Self::id) but reports unknown names as an error.
    pub fn lookup(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.id(name)
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        self.parent[x.index()]
    }

    pub fn children(&self, x: NodeId) -> &[NodeId] {
        &self.children[x.index()]
    }

    pub fn is_leaf(&self, x: NodeId) -> bool {
        self.children[x.index()].is_empty()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Roots in bus order.
    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn root_of(&self, x: NodeId) -> NodeId {
        self.root_of[x.index()]
    }

    pub fn bus_position(&self, x: NodeId) -> Option<usize> {
        self.bus_pos[x.index()]
    }

    pub fn depth(&self, x: NodeId) -> u32 {
        self.depth[x.index()]
    }

    /// Cost of the link from `x` to its parent (0 for roots).
    pub fn up_cost(&self, x: NodeId) -> Cost {
        self.up_cost[x.index()]
    }

    pub fn bus_link_cost(&self) -> Cost {
        self.bus_cost
    }

    /// `x`, its parent, and so on up to its root.
    pub fn ancestors(&self, x: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(Some(x), move |&n| self.parent[n.index()])
    }

    /// Deepest common ancestor, or `None` when `x` and `y` hang under
    /// different roots.
    pub fn lca(&self, x: NodeId, y: NodeId) -> Result<Option<NodeId>, TopologyError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.lca_unchecked(x, y))
    }

    fn lca_unchecked(&self, mut x: NodeId, mut y: NodeId) -> Option<NodeId> {
        if self.root_of[x.index()] != self.root_of[y.index()] {
            return None;
        }
        while self.depth[x.index()] > self.depth[y.index()] {
            x = self.parent[x.index()]?;
        }
        while self.depth[y.index()] > self.depth[x.index()] {
            y = self.parent[y.index()]?;
        }
        while x != y {
            x = self.parent[x.index()]?;
            y = self.parent[y.index()]?;
        }
        Some(x)
    }

    /// Roots visited when travelling the bus from root `a` to root `b`,
    /// both inclusive.
    pub fn bus_path(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let (i, j) = (
            self.bus_pos[a.index()].expect("bus_path on a non-root"),
            self.bus_pos[b.index()].expect("bus_path on a non-root"),
        );
        if i <= j {
            self.roots[i..=j].to_vec()
        } else {
            self.roots[j..=i].iter().rev().copied().collect()
        }
    }

    /// Unique simple path in the routing graph, both endpoints included.
    pub fn path(&self, x: NodeId, y: NodeId) -> Result<Vec<NodeId>, TopologyError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.path_unchecked(x, y))
    }

    pub(crate) fn path_unchecked(&self, x: NodeId, y: NodeId) -> Vec<NodeId> {
        match self.lca_unchecked(x, y) {
            Some(top) => {
                let mut up: Vec<NodeId> = self.ancestors(x).take_while(|&n| n != top).collect();
                up.push(top);
                let mut down: Vec<NodeId> = self.ancestors(y).take_while(|&n| n != top).collect();
                down.reverse();
                up.extend(down);
                up
            }
            None => {
                let (rx, ry) = (self.root_of(x), self.root_of(y));
                let mut out: Vec<NodeId> = self.ancestors(x).take_while(|&n| n != rx).collect();
                out.extend(self.bus_path(rx, ry));
                let mut down: Vec<NodeId> = self.ancestors(y).take_while(|&n| n != ry).collect();
                down.reverse();
                out.extend(down);
                out
            }
        }
    }

    fn climb_cost(&self, from: NodeId, to: NodeId) -> Cost {
        self.ancestors(from)
            .take_while(|&n| n != to)
            .map(|n| self.up_cost[n.index()])
            .sum()
    }

    /// Sum of link costs along [`path`](Self::path).
    pub fn cost(&self, x: NodeId, y: NodeId) -> Result<Cost, TopologyError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.cost_unchecked(x, y))
    }

    pub(crate) fn cost_unchecked(&self, x: NodeId, y: NodeId) -> Cost {
        match self.lca_unchecked(x, y) {
            Some(top) => self.climb_cost(x, top) + self.climb_cost(y, top),
            None => {
                let (rx, ry) = (self.root_of(x), self.root_of(y));
                let (i, j) = (
                    self.bus_pos[rx.index()].unwrap(),
                    self.bus_pos[ry.index()].unwrap(),
                );
                self.climb_cost(x, rx) + self.climb_cost(y, ry) + self.bus_cost * i.abs_diff(j) as Cost
            }
        }
    }

    /// Number of links on the path, regardless of their cost.
    pub fn hop_count(&self, x: NodeId, y: NodeId) -> Result<u64, TopologyError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.hop_count_unchecked(x, y))
    }

    pub(crate) fn hop_count_unchecked(&self, x: NodeId, y: NodeId) -> u64 {
        let (dx, dy) = (self.depth(x) as u64, self.depth(y) as u64);
        match self.lca_unchecked(x, y) {
            Some(top) => dx + dy - 2 * self.depth(top) as u64,
            None => {
                let i = self.bus_pos[self.root_of(x).index()].unwrap();
                let j = self.bus_pos[self.root_of(y).index()].unwrap();
                dx + dy + i.abs_diff(j) as u64
            }
        }
    }

    /// Sum of link costs along an explicit node sequence.
    pub fn path_cost(&self, path: &[NodeId]) -> Cost {
        path.windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if self.parent(a) == Some(b) {
                    self.up_cost(a)
                } else if self.parent(b) == Some(a) {
                    self.up_cost(b)
                } else {
                    self.bus_cost
                }
            })
            .sum()
    }

    /// Names of the given nodes, handy for diagnostics and tests.
    pub fn names_of(&self, path: &[NodeId]) -> Vec<&str> {
        path.iter().map(|&n| self.name(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HierarchyTree {
        let mut b = TreeBuilder::new();
        b.root("A").root("B");
        b.edge("A", "x", 1).edge("A", "y", 2);
        b.edge("B", "z", 1).edge("B", "w", 1);
        b.build().unwrap()
    }

    #[test]
    fn weighted_costs() {
        let t = small();
        let (x, y, z) = (t.id("x").unwrap(), t.id("y").unwrap(), t.id("z").unwrap());
        assert_eq!(t.cost(x, y).unwrap(), 3);
        assert_eq!(t.cost(y, z).unwrap(), 2 + 1 + 1);
        assert_eq!(t.hop_count(y, z).unwrap(), 3);
        assert_eq!(t.path_cost(&t.path(y, z).unwrap()), 4);
    }

    #[test]
    fn single_child_rejected() {
        let mut b = TreeBuilder::new();
        b.root("R").edge("R", "a", 1);
        assert!(matches!(b.build(), Err(TopologyError::MinChildren(n)) if n == "R"));
    }

    #[test]
    fn cycle_and_orphans_rejected() {
        let mut b = TreeBuilder::new();
        b.root("R").edge("R", "a", 1).edge("R", "b", 1);
        b.edge("p", "q", 1).edge("q", "p", 1).edge("p", "r", 1);
        let issues = b.diagnose();
        assert!(issues.iter().any(|e| matches!(e, TopologyError::Disconnected(_))));
    }

    #[test]
    fn unknown_node_is_an_error() {
        let t = small();
        assert!(t.lca(NodeId(99), NodeId(0)).is_err());
        assert!(t.path(NodeId(0), NodeId(99)).is_err());
        assert!(t.cost(NodeId(99), NodeId(99)).is_err());
    }

    #[test]
    fn root_with_parent_rejected() {
        let mut b = TreeBuilder::new();
        b.root("R").root("S").edge("R", "S", 1).edge("R", "a", 1);
        assert!(b
            .diagnose()
            .iter()
            .any(|e| matches!(e, TopologyError::RootHasParent(n) if n == "S")));
    }
}
