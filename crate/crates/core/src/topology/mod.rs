//! Zone geography and the tree of location registers.

mod fixture;
mod grid;
mod parse;
mod tree;

pub use fixture::{canonical_fixture, CANONICAL_CELL_SIZE};
pub use grid::{ZoneGrid, PROB_SUM_TOLERANCE};
pub use parse::{to_text, TopologySpec, DEFAULT_CELL_SIZE};
pub use tree::{Cost, HierarchyTree, NodeId, TreeBuilder};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("no root declared")]
    NoRoots,
    #[error("root {0} listed twice")]
    DuplicateRoot(String),
    #[error("root {0} has a parent")]
    RootHasParent(String),
    #[error("node {0} has more than one parent")]
    MultipleParents(String),
    #[error("cycle through {0}")]
    Cycle(String),
    #[error("node {0} is not reachable from any root")]
    Disconnected(String),
    #[error("min-children violated at {0}")]
    MinChildren(String),
    #[error("zone {0} is not a leaf of the hierarchy")]
    NotALeaf(String),
    #[error("leaf {0} owns no grid cell")]
    ZoneWithoutCells(String),
    #[error("probability sum violated at {zone} (sum {sum})")]
    ProbabilitySum { zone: String, sum: f64 },
    #[error("position ({x}, {y}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Register hierarchy plus (optionally) the geography its leaves cover.
#[derive(Clone, Debug)]
pub struct Topology {
    pub tree: HierarchyTree,
    pub grid: Option<ZoneGrid>,
}

impl Topology {
    pub fn canonical() -> Self {
        canonical_fixture()
    }

    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        TopologySpec::parse(text)?.build()
    }

    pub fn grid(&self) -> Result<&ZoneGrid, TopologyError> {
        self.grid
            .as_ref()
            .ok_or_else(|| TopologyError::BadGrid("topology declares no zones".into()))
    }
}
