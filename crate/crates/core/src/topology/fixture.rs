use super::{Topology, TreeBuilder, ZoneGrid};

/// Side of one grid cell in the canonical fixture, meters.
pub const CANONICAL_CELL_SIZE: f64 = 500.0;

const EDGES: &[(&str, &str)] = &[
    ("R1", "i"),
    ("R1", "j"),
    ("i", "f"),
    ("i", "g"),
    ("f", "a"),
    ("f", "b"),
    ("g", "c"),
    ("g", "c2"),
    ("j", "h"),
    ("j", "h2"),
    ("h", "d"),
    ("h", "d2"),
    ("R2", "s"),
    ("R2", "t"),
    ("s", "s1"),
    ("s", "s2"),
    ("t", "t1"),
    ("t", "t2"),
    ("R3", "u"),
    ("R3", "v"),
    ("u", "u1"),
    ("u", "u2"),
    ("v", "v1"),
    ("v", "v2"),
    ("R4", "k"),
    ("R4", "k2"),
    ("k", "l"),
    ("k", "l2"),
    ("l", "e"),
    ("l", "e2"),
];

/// Zones laid out on a 4x5 grid in boustrophedon order so that leaves that
/// are close in the tree are also geographic neighbours. `k2` owns two cells.
const LAYOUT: [[&str; 5]; 4] = [
    ["a", "b", "c", "c2", "d"],
    ["t1", "s2", "s1", "h2", "d2"],
    ["t2", "u1", "u2", "v1", "v2"],
    ["k2", "k2", "l2", "e2", "e"],
];

/// Four roots `R1..R4` on the bus, the named registers of the reference
/// hierarchy, and minimal two-child filler wherever the hierarchy leaves a
/// subtree undrawn. Every link costs 1.
pub fn canonical_fixture() -> Topology {
    let mut b = TreeBuilder::new();
    b.root("R1").root("R2").root("R3").root("R4");
    for (p, c) in EDGES {
        b.edge(p, c, 1);
    }
    let tree = b.build().expect("canonical tree is well formed");
    let cells = LAYOUT
        .iter()
        .flat_map(|row| row.iter())
        .map(|name| tree.id(name).expect("layout names a fixture leaf"))
        .collect();
    let mut grid = ZoneGrid::new(4, 5, CANONICAL_CELL_SIZE, cells).expect("layout is 4x5");
    grid.fill_adjacency_moves();
    Topology {
        tree,
        grid: Some(grid),
    }
}
