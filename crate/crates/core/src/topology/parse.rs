//! Line-based topology files.
//!
//! ```text
//! # comment
//! root R1 R2 R3          # bus order
//! edge R1 i [cost]       # parent child, cost defaults to 1
//! zone a 0 0 1 1         # leaf, inclusive cell rectangle row0 col0 row1 col1
//! move a b:0.5 c:0.5     # crossing probabilities out of zone a
//! cell_size 500          # meters per cell side (default 100)
//! bus_cost 1             # cost of each bus link (default 1)
//! ```
//!
//! When no `move` lines are present the movement matrix defaults to uniform
//! probabilities over edge-adjacent zones.

use std::fmt::Write as _;

use super::{Cost, Topology, TopologyError, TreeBuilder, ZoneGrid, PROB_SUM_TOLERANCE};

pub const DEFAULT_CELL_SIZE: f64 = 100.0;

#[derive(Clone, Debug)]
struct ZoneRect {
    name: String,
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

/// Parsed but not yet validated topology declaration.
#[derive(Clone, Debug, Default)]
pub struct TopologySpec {
    builder: TreeBuilder,
    zones: Vec<ZoneRect>,
    moves: Vec<(String, Vec<(String, f64)>)>,
    cell_size: Option<f64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> TopologyError {
    TopologyError::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, TopologyError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

impl TopologySpec {
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut spec = TopologySpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            match toks[0] {
                "root" => {
                    if toks.len() < 2 {
                        return Err(parse_err(line, "root needs at least one id"));
                    }
                    for t in &toks[1..] {
                        spec.builder.root(t);
                    }
                }
                "edge" => {
                    let cost: Cost = match toks.len() {
                        3 => 1,
                        4 => num(toks[3], line, "cost")?,
                        _ => return Err(parse_err(line, "edge <parent> <child> [cost]")),
                    };
                    spec.builder.edge(toks[1], toks[2], cost);
                }
                "zone" => {
                    if toks.len() != 6 {
                        return Err(parse_err(line, "zone <id> <row0> <col0> <row1> <col1>"));
                    }
                    let r = ZoneRect {
                        name: toks[1].to_string(),
                        r0: num(toks[2], line, "row0")?,
                        c0: num(toks[3], line, "col0")?,
                        r1: num(toks[4], line, "row1")?,
                        c1: num(toks[5], line, "col1")?,
                    };
                    if r.r1 < r.r0 || r.c1 < r.c0 {
                        return Err(parse_err(line, "empty zone rectangle"));
                    }
                    spec.zones.push(r);
                }
                "move" => {
                    if toks.len() < 2 {
                        return Err(parse_err(line, "move <zone> <neighbor>:<prob> ..."));
                    }
                    let mut row = Vec::new();
                    for t in &toks[2..] {
                        let (n, p) = t
                            .split_once(':')
                            .ok_or_else(|| parse_err(line, format!("expected neighbor:prob, got `{t}`")))?;
                        row.push((n.to_string(), num(p, line, "probability")?));
                    }
                    spec.moves.push((toks[1].to_string(), row));
                }
                "cell_size" => {
                    if toks.len() != 2 {
                        return Err(parse_err(line, "cell_size <meters>"));
                    }
                    spec.cell_size = Some(num(toks[1], line, "cell size")?);
                }
                "bus_cost" => {
                    if toks.len() != 2 {
                        return Err(parse_err(line, "bus_cost <cost>"));
                    }
                    spec.builder.bus_cost(num(toks[1], line, "bus cost")?);
                }
                other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
            }
        }
        Ok(spec)
    }

    /// Every problem found in the declaration, without stopping at the first.
    pub fn diagnose(&self) -> Vec<TopologyError> {
        let mut issues = self.builder.diagnose();
        if !issues.is_empty() {
            for (zone, row) in &self.moves {
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                if row.iter().any(|(_, p)| !(*p >= 0.0) || !p.is_finite()) || (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                    issues.push(TopologyError::ProbabilitySum { zone: zone.clone(), sum });
                }
            }
            return issues;
        }
        let tree = self.builder.clone().build().expect("diagnosed clean");
        if self.zones.is_empty() {
            return issues;
        }
        match self.grid(&tree) {
            Ok(grid) => issues.extend(grid.diagnose(&tree)),
            Err(e) => issues.push(e),
        }
        issues
    }

    fn grid(&self, tree: &super::HierarchyTree) -> Result<ZoneGrid, TopologyError> {
        let rows = self.zones.iter().map(|z| z.r1 + 1).max().unwrap_or(0);
        let cols = self.zones.iter().map(|z| z.c1 + 1).max().unwrap_or(0);
        let mut cells = vec![None; rows * cols];
        for z in &self.zones {
            let id = tree.lookup(&z.name)?;
            for r in z.r0..=z.r1 {
                for c in z.c0..=z.c1 {
                    let slot = &mut cells[r * cols + c];
                    if slot.is_some() {
                        return Err(TopologyError::BadGrid(format!(
                            "cell ({r},{c}) claimed twice"
                        )));
                    }
                    *slot = Some(id);
                }
            }
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    TopologyError::BadGrid(format!("cell ({},{}) has no zone", i / cols, i % cols))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut grid = ZoneGrid::new(rows, cols, self.cell_size.unwrap_or(DEFAULT_CELL_SIZE), cells)?;
        if self.moves.is_empty() {
            grid.fill_adjacency_moves();
        } else {
            for (zone, row) in &self.moves {
                let z = tree.lookup(zone)?;
                let row = row
                    .iter()
                    .map(|(n, p)| Ok((tree.lookup(n)?, *p)))
                    .collect::<Result<Vec<_>, TopologyError>>()?;
                grid.set_move_row(z, row);
            }
        }
        Ok(grid)
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        if let Some(first) = self.diagnose().into_iter().next() {
            return Err(first);
        }
        let tree = self.builder.clone().build()?;
        let grid = if self.zones.is_empty() {
            None
        } else {
            Some(self.grid(&tree)?)
        };
        Ok(Topology { tree, grid })
    }
}

/// Serializes a topology back into the line format.
pub fn to_text(topo: &Topology) -> String {
    let t = &topo.tree;
    let mut out = String::new();
    let roots: Vec<&str> = t.roots().iter().map(|&r| t.name(r)).collect();
    writeln!(out, "root {}", roots.join(" ")).unwrap();
    if t.bus_link_cost() != 1 {
        writeln!(out, "bus_cost {}", t.bus_link_cost()).unwrap();
    }
    for n in t.nodes() {
        for &c in t.children(n) {
            if t.up_cost(c) == 1 {
                writeln!(out, "edge {} {}", t.name(n), t.name(c)).unwrap();
            } else {
                writeln!(out, "edge {} {} {}", t.name(n), t.name(c), t.up_cost(c)).unwrap();
            }
        }
    }
    if let Some(g) = &topo.grid {
        writeln!(out, "cell_size {}", g.cell_size()).unwrap();
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                writeln!(out, "zone {} {r} {c} {r} {c}", t.name(g.zone_of_cell(r, c))).unwrap();
            }
        }
        for (z, row) in g.move_rows() {
            let parts: Vec<String> = row.iter().map(|(n, p)| format!("{}:{}", t.name(*n), p)).collect();
            writeln!(out, "move {} {}", t.name(z), parts.join(" ")).unwrap();
        }
    }
    out
}
