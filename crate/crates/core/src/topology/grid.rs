use std::collections::{BTreeMap, BTreeSet};

use super::{HierarchyTree, NodeId, TopologyError};

/// Tolerance used when checking that a row of crossing probabilities sums to 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Geography of the service area: a rectangular array of square cells, each
/// owned by one leaf zone, plus the zone-to-zone movement matrix.
///
/// Cells are half-open: cell `(row, col)` covers
/// `[col*cell, (col+1)*cell) x [row*cell, (row+1)*cell)`.
#[derive(Clone, Debug)]
pub struct ZoneGrid {
    rows: usize,
    cols: usize,
    cell_size: f64,
    cells: Vec<NodeId>,
    moves: BTreeMap<NodeId, Vec<(NodeId, f64)>>,
}

impl ZoneGrid {
    /// `cells` is row-major, `rows * cols` long.
    pub fn new(
        rows: usize,
        cols: usize,
        cell_size: f64,
        cells: Vec<NodeId>,
    ) -> Result<Self, TopologyError> {
        if rows == 0 || cols == 0 || !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(TopologyError::BadGrid(format!(
                "rows={rows} cols={cols} cell_size={cell_size}"
            )));
        }
        if cells.len() != rows * cols {
            return Err(TopologyError::BadGrid(format!(
                "{} cells given for a {rows}x{cols} grid",
                cells.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            cell_size,
            cells,
            moves: BTreeMap::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    pub fn zone_of_cell(&self, row: usize, col: usize) -> NodeId {
        self.cells[row * self.cols + col]
    }

    /// Cell containing `(x, y)`. A point on a shared edge belongs to the
    /// cell whose lower edge it lies on.
    pub fn cell_of(&self, x: f64, y: f64) -> Result<(usize, usize), TopologyError> {
        if !(x >= 0.0 && x < self.width() && y >= 0.0 && y < self.height()) {
            return Err(TopologyError::OutOfBounds { x, y });
        }
        let col = ((x / self.cell_size) as usize).min(self.cols - 1);
        let row = ((y / self.cell_size) as usize).min(self.rows - 1);
        Ok((row, col))
    }

    pub fn zone_of(&self, x: f64, y: f64) -> Result<NodeId, TopologyError> {
        let (r, c) = self.cell_of(x, y)?;
        Ok(self.zone_of_cell(r, c))
    }

    /// Distinct zones in first-appearance (row-major) order.
    pub fn zones(&self) -> Vec<NodeId> {
        let mut seen = BTreeSet::new();
        self.cells.iter().copied().filter(|z| seen.insert(*z)).collect()
    }

    /// Cells owned by `zone`, row-major.
    pub fn cells_of(&self, zone: NodeId) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.zone_of_cell(r, c) == zone)
            .collect()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn move_row(&self, zone: NodeId) -> Option<&[(NodeId, f64)]> {
        self.moves.get(&zone).map(Vec::as_slice)
    }

    pub fn move_rows(&self) -> impl Iterator<Item = (NodeId, &[(NodeId, f64)])> {
        self.moves.iter().map(|(z, r)| (*z, r.as_slice()))
    }

    pub fn set_move_row(&mut self, zone: NodeId, row: Vec<(NodeId, f64)>) {
        self.moves.insert(zone, row);
    }

    /// Fills every zone's row with uniform probabilities over the zones that
    /// share a cell edge with it.
    pub fn fill_adjacency_moves(&mut self) {
        let mut neighbors: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let z = self.zone_of_cell(r, c);
                let entry = neighbors.entry(z).or_default();
                let mut adj = Vec::new();
                if r > 0 {
                    adj.push(self.zone_of_cell(r - 1, c));
                }
                if r + 1 < self.rows {
                    adj.push(self.zone_of_cell(r + 1, c));
                }
                if c > 0 {
                    adj.push(self.zone_of_cell(r, c - 1));
                }
                if c + 1 < self.cols {
                    adj.push(self.zone_of_cell(r, c + 1));
                }
                entry.extend(adj.into_iter().filter(|&n| n != z));
            }
        }
        for (z, ns) in neighbors {
            if ns.is_empty() {
                self.moves.insert(z, vec![(z, 1.0)]);
                continue;
            }
            let p = 1.0 / ns.len() as f64;
            self.moves.insert(z, ns.into_iter().map(|n| (n, p)).collect());
        }
    }

    /// Problems with the cell table and movement matrix against `tree`.
    pub fn diagnose(&self, tree: &HierarchyTree) -> Vec<TopologyError> {
        let mut issues = Vec::new();
        let owned: BTreeSet<NodeId> = self.cells.iter().copied().collect();
        for &z in &owned {
            if !tree.contains(z) || !tree.is_leaf(z) {
                issues.push(TopologyError::NotALeaf(label(tree, z)));
            }
        }
        for &leaf in tree.leaves() {
            if !owned.contains(&leaf) {
                issues.push(TopologyError::ZoneWithoutCells(tree.name(leaf).to_string()));
            }
        }
        for (zone, row) in &self.moves {
            let mut sum = 0.0;
            for &(n, p) in row {
                if !(p >= 0.0) || !p.is_finite() {
                    issues.push(TopologyError::ProbabilitySum {
                        zone: label(tree, *zone),
                        sum: p,
                    });
                }
                if !owned.contains(&n) {
                    issues.push(TopologyError::NotALeaf(label(tree, n)));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                issues.push(TopologyError::ProbabilitySum {
                    zone: label(tree, *zone),
                    sum,
                });
            }
        }
        issues
    }
}

fn label(tree: &HierarchyTree, z: NodeId) -> String {
    if tree.contains(z) {
        tree.name(z).to_string()
    } else {
        z.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> ZoneGrid {
        ZoneGrid::new(2, 2, 10.0, vec![NodeId(0), NodeId(1), NodeId(2), NodeId(2)]).unwrap()
    }

    #[test]
    fn corner_cell() {
        let g = two_by_two();
        assert_eq!(g.zone_of(0.0, 0.0).unwrap(), NodeId(0));
    }

    #[test]
    fn boundary_goes_to_cell_starting_there() {
        let g = two_by_two();
        assert_eq!(g.cell_of(10.0, 0.0).unwrap(), (0, 1));
        assert_eq!(g.cell_of(9.999_999, 0.0).unwrap(), (0, 0));
        assert_eq!(g.zone_of(0.0, 10.0).unwrap(), NodeId(2));
    }

    #[test]
    fn out_of_bounds() {
        let g = two_by_two();
        assert!(g.zone_of(20.0, 0.0).is_err());
        assert!(g.zone_of(-0.1, 0.0).is_err());
        assert!(g.zone_of(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn adjacency_rows_sum_to_one() {
        let mut g = two_by_two();
        g.fill_adjacency_moves();
        for (_, row) in g.move_rows() {
            let s: f64 = row.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let row0: Vec<NodeId> = g.move_row(NodeId(0)).unwrap().iter().map(|p| p.0).collect();
        assert_eq!(row0, vec![NodeId(1), NodeId(2)]);
    }

    #[test]
    fn bad_grid_dimensions() {
        assert!(ZoneGrid::new(0, 2, 1.0, vec![]).is_err());
        assert!(ZoneGrid::new(1, 2, 1.0, vec![NodeId(0)]).is_err());
        assert!(ZoneGrid::new(1, 1, 0.0, vec![NodeId(0)]).is_err());
    }
}
