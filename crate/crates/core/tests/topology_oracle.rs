mod common;

use common::{ids, tree_spec, Oracle};
use locsim::topology::Topology;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weighted_routes_match_oracle(spec in tree_spec(50, true)) {
        let tree = spec.build();
        let oracle = Oracle::new(&spec);
        let id = ids(&tree, spec.nodes);
        for a in 0..spec.nodes {
            for b in 0..spec.nodes {
                let want: Vec<_> = oracle.path(a, b).into_iter().map(|i| id[i]).collect();
                prop_assert_eq!(tree.path(id[a], id[b]).unwrap(), want);
                prop_assert_eq!(tree.cost(id[a], id[b]).unwrap(), oracle.cost(a, b));
                prop_assert_eq!(tree.lca(id[a], id[b]).unwrap(), oracle.lca(a, b).map(|i| id[i]));
            }
        }
    }

    #[test]
    fn lca_lies_on_the_path_once(spec in tree_spec(40, false)) {
        let tree = spec.build();
        let id = ids(&tree, spec.nodes);
        for &a in &id {
            for &b in &id {
                let path = tree.path(a, b).unwrap();
                prop_assert_eq!(tree.hop_count(a, b).unwrap() as usize, path.len() - 1);
                if let Some(top) = tree.lca(a, b).unwrap() {
                    prop_assert_eq!(path.iter().filter(|&&n| n == top).count(), 1);
                    prop_assert!(path.iter().all(|&n| tree.depth(n) >= tree.depth(top)));
                } else {
                    prop_assert_ne!(tree.root_of(a), tree.root_of(b));
                }
            }
        }
    }
}

#[test]
fn fixture_costs_match_oracle_walks() {
    let t = Topology::canonical().tree;
    let n = |s| t.id(s).unwrap();
    assert_eq!(t.cost(n("a"), n("b")).unwrap(), 2);
    assert_eq!(t.cost(n("a"), n("e")).unwrap(), 9);
    assert_eq!(t.cost(n("a"), n("d")).unwrap(), 6);
    assert_eq!(t.lca(n("a"), n("c")).unwrap(), Some(n("i")));
    assert_eq!(t.lca(n("a"), n("e")).unwrap(), None);
    assert_eq!(t.names_of(&t.path(n("d"), n("a")).unwrap()), ["d", "h", "j", "R1", "i", "f", "a"]);
}

#[test]
fn text_form_round_trips() {
    let topo = Topology::canonical();
    let again = Topology::parse(&locsim::topology::to_text(&topo)).unwrap();
    for a in topo.tree.nodes() {
        for b in topo.tree.nodes() {
            let (x, y) = (again.tree.id(topo.tree.name(a)).unwrap(), again.tree.id(topo.tree.name(b)).unwrap());
            assert_eq!(topo.tree.cost(a, b).unwrap(), again.tree.cost(x, y).unwrap());
        }
    }
    let (g, h) = (topo.grid.unwrap(), again.grid.unwrap());
    assert_eq!((g.rows(), g.cols(), g.cell_size()), (h.rows(), h.cols(), h.cell_size()));
}
