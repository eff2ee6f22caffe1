//! Trace files and zone-crossing extraction.
//!
//! ```text
//! #mobtrace v1 2500 2000
//! 0 0 125.5 730.25
//! 1 0 130.1 731.0
//! ```
//!
//! ```text
//! #zonetrace v1
//! 12.5 3 a b
//! ```

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;

use super::MobilityError;
use crate::topology::{HierarchyTree, NodeId, TopologyError, ZoneGrid};

pub const MOBTRACE_HEADER: &str = "#mobtrace v1";
pub const ZONETRACE_HEADER: &str = "#zonetrace v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub node: u32,
    pub x: f64,
    pub y: f64,
}

/// A mobile node crossing from one zone into another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoneMove {
    pub time: f64,
    pub node: u32,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ImportedTrace {
    Positions { width: f64, height: f64, records: Vec<TraceRecord> },
    ZoneEvents(Vec<ZoneMove>),
}

/// One move per zone change in a time-ordered sample stream. The first
/// sample of each node only fixes its starting zone.
pub fn emit_zone_crossings(records: &[TraceRecord], grid: &ZoneGrid) -> Result<Vec<ZoneMove>, MobilityError> {
    let mut last: HashMap<u32, NodeId> = HashMap::new();
    let mut out = Vec::new();
    for r in records {
        let z = grid.zone_of(r.x, r.y)?;
        match last.insert(r.node, z) {
            Some(prev) if prev != z => out.push(ZoneMove {
                time: r.time,
                node: r.node,
                from: prev,
                to: z,
            }),
            _ => {}
        }
    }
    Ok(out)
}

/// Starting zone of every node that appears in `records`, by node id.
pub fn initial_zones(records: &[TraceRecord], grid: &ZoneGrid) -> Result<HashMap<u32, NodeId>, MobilityError> {
    let mut out = HashMap::new();
    for r in records {
        if let std::collections::hash_map::Entry::Vacant(e) = out.entry(r.node) {
            e.insert(grid.zone_of(r.x, r.y)?);
        }
    }
    Ok(out)
}

/// Next zone drawn from the zone's crossing-probability row.
pub fn matrix_walk<R: Rng + ?Sized>(zone: NodeId, grid: &ZoneGrid, rng: &mut R) -> Result<NodeId, MobilityError> {
    let row = grid
        .move_row(zone)
        .ok_or_else(|| TopologyError::BadGrid(format!("zone {zone} has no movement row")))?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(n, p) in row {
        acc += p;
        if u < acc {
            return Ok(n);
        }
    }
    row.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(n, _)| *n)
        .ok_or_else(|| TopologyError::BadGrid(format!("zone {zone} has an empty movement row")).into())
}

pub fn write_mobtrace<W: Write>(mut w: W, width: f64, height: f64, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(w, "{MOBTRACE_HEADER} {width} {height}")?;
    for r in records {
        writeln!(w, "{} {} {} {}", r.time, r.node, r.x, r.y)?;
    }
    Ok(())
}

pub fn write_zone_events<W: Write>(mut w: W, tree: &HierarchyTree, moves: &[ZoneMove]) -> io::Result<()> {
    writeln!(w, "{ZONETRACE_HEADER}")?;
    for m in moves {
        writeln!(w, "{} {} {} {}", m.time, m.node, tree.name(m.from), tree.name(m.to))?;
    }
    Ok(())
}

fn trace_err(line: usize, msg: impl Into<String>) -> MobilityError {
    MobilityError::Trace { line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MobilityError> {
    tok.parse().map_err(|_| trace_err(line, format!("bad {what} `{tok}`")))
}

/// Reads either trace format, chosen by the header line. Times must not
/// decrease for any node.
pub fn read_trace(text: &str, tree: &HierarchyTree) -> Result<ImportedTrace, MobilityError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| trace_err(1, "empty trace"))?;
    let mut last_time: HashMap<u32, f64> = HashMap::new();
    let mut check_time = |line: usize, node: u32, t: f64| {
        if !t.is_finite() {
            return Err(trace_err(line, "time is not finite"));
        }
        if let Some(prev) = last_time.insert(node, t) {
            if t < prev {
                return Err(trace_err(line, format!("time goes backwards for node {node}")));
            }
        }
        Ok(())
    };
    if let Some(rest) = header.strip_prefix(MOBTRACE_HEADER) {
        let dims: Vec<&str> = rest.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(trace_err(1, "header needs width and height"));
        }
        let width = field(dims[0], 1, "width")?;
        let height = field(dims[1], 1, "height")?;
        let mut records = Vec::new();
        for (n, l) in lines {
            if l.starts_with('#') {
                continue;
            }
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 4 {
                return Err(trace_err(n, "expected `t node x y`"));
            }
            let r = TraceRecord {
                time: field(t[0], n, "time")?,
                node: field(t[1], n, "node id")?,
                x: field(t[2], n, "x")?,
                y: field(t[3], n, "y")?,
            };
            check_time(n, r.node, r.time)?;
            records.push(r);
        }
        Ok(ImportedTrace::Positions { width, height, records })
    } else if header.starts_with(ZONETRACE_HEADER) {
        let mut moves = Vec::new();
        for (n, l) in lines {
            if l.starts_with('#') {
                continue;
            }
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 4 {
                return Err(trace_err(n, "expected `t node from to`"));
            }
            let zone = |name: &str| -> Result<NodeId, MobilityError> {
                let id = tree.lookup(name).map_err(|e| trace_err(n, e.to_string()))?;
                if !tree.is_leaf(id) {
                    return Err(trace_err(n, format!("{name} is not a zone")));
                }
                Ok(id)
            };
            let m = ZoneMove {
                time: field(t[0], n, "time")?,
                node: field(t[1], n, "node id")?,
                from: zone(t[2])?,
                to: zone(t[3])?,
            };
            check_time(n, m.node, m.time)?;
            moves.push(m);
        }
        Ok(ImportedTrace::ZoneEvents(moves))
    } else {
        Err(trace_err(1, format!("unknown header `{header}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(time: f64, x: f64) -> TraceRecord {
        TraceRecord { time, node: 0, x, y: 10.0 }
    }

    #[test]
    fn stationary_node_emits_nothing() {
        let topo = Topology::canonical();
        let recs: Vec<_> = (0..10).map(|k| rec(k as f64, 100.0)).collect();
        assert!(emit_zone_crossings(&recs, topo.grid().unwrap()).unwrap().is_empty());
    }

    #[test]
    fn single_boundary_crossing() {
        let topo = Topology::canonical();
        let t = &topo.tree;
        let recs = [rec(0.0, 490.0), rec(1.0, 499.0), rec(2.0, 505.0), rec(3.0, 510.0)];
        let moves = emit_zone_crossings(&recs, topo.grid().unwrap()).unwrap();
        assert_eq!(moves.len(), 1);
        assert_eq!((moves[0].from, moves[0].to), (t.id("a").unwrap(), t.id("b").unwrap()));
        assert_eq!(moves[0].time, 2.0);
    }

    #[test]
    fn matrix_walk_follows_row() {
        let mut topo = Topology::canonical();
        let a = topo.tree.id("a").unwrap();
        let b = topo.tree.id("b").unwrap();
        let g = topo.grid.as_mut().unwrap();
        g.set_move_row(a, vec![(b, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(matrix_walk(a, g, &mut rng).unwrap(), b);
        }
        g.set_move_row(a, vec![(a, 1.0)]);
        assert_eq!(matrix_walk(a, g, &mut rng).unwrap(), a);
    }

    #[test]
    fn matrix_walk_without_row_fails() {
        let mut topo = Topology::canonical();
        let a = topo.tree.id("a").unwrap();
        let r1 = topo.tree.id("R1").unwrap();
        let g = topo.grid.as_mut().unwrap();
        g.set_move_row(a, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matrix_walk(a, g, &mut rng).is_err());
        assert!(matrix_walk(r1, g, &mut rng).is_err());
    }

    #[test]
    fn rejects_backwards_time() {
        let topo = Topology::canonical();
        let text = "#mobtrace v1 10 10\n1 0 1 1\n0.5 0 1 1\n";
        let err = read_trace(text, &topo.tree).unwrap_err();
        assert!(matches!(err, MobilityError::Trace { line: 3, .. }));
    }

    #[test]
    fn zone_event_round_trip() {
        let topo = Topology::canonical();
        let t = &topo.tree;
        let moves = vec![ZoneMove {
            time: 1.25,
            node: 4,
            from: t.id("a").unwrap(),
            to: t.id("b").unwrap(),
        }];
        let mut buf = Vec::new();
        write_zone_events(&mut buf, t, &moves).unwrap();
        let back = read_trace(std::str::from_utf8(&buf).unwrap(), t).unwrap();
        assert_eq!(back, ImportedTrace::ZoneEvents(moves));
    }
}
