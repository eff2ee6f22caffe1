//! Location-management schemes behind one event interface.
//!
//! Each scheme answers moves and calls with a [`MessageLog`]: one [`Message`]
//! per logical message, carrying its full path cost and the database reads
//! and writes it causes.

mod hier;
mod hlr;
mod working_set;

pub use hier::{HierScheme, Pointer};
pub use hlr::HlrScheme;
pub use working_set::{u_cost, ws_decide, ws_decide_with, ws_delta_hier, ws_delta_hlr, UCostMode, WorkingSetLedger, WsConfig};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::topology::{Cost, HierarchyTree, NodeId, TopologyError};

pub type UserId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {0} registered twice")]
    AlreadyRegistered(UserId),
    #[error("{0} is not a zone")]
    NotAZone(NodeId),
    #[error("user {user} moves from {claimed} but is recorded at {recorded}")]
    StaleMove { user: UserId, claimed: NodeId, recorded: NodeId },
    #[error("lookup failure for user {user}: {detail}")]
    LookupFailure { user: UserId, detail: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Update,
    Deregister,
    Lookup,
    ReplicaUpdate,
    Invalidate,
    CallDelivery,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Update,
        MessageKind::Deregister,
        MessageKind::Lookup,
        MessageKind::ReplicaUpdate,
        MessageKind::Invalidate,
        MessageKind::CallDelivery,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub from: NodeId,
    pub to: NodeId,
    /// Nodes traversed, both ends included.
    pub path: Vec<NodeId>,
    /// Sum of link costs along `path`.
    pub hops: Cost,
    pub reads: u32,
    pub writes: u32,
    /// Contribution to the lookup cost of a call. Zero for non-call traffic.
    pub lookup_cost: Cost,
}

/// Outcome of one call lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LookupOutcome {
    /// Answered by the caller's own zone.
    pub local: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessageLog {
    pub messages: Vec<Message>,
    /// Present for calls only.
    pub lookup: Option<LookupOutcome>,
}

impl MessageLog {
    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn of_kind(&self, kind: MessageKind) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.kind == kind)
    }

    pub fn hops(&self) -> Cost {
        self.messages.iter().map(|m| m.hops).sum()
    }

    pub fn reads(&self) -> u64 {
        self.messages.iter().map(|m| m.reads as u64).sum()
    }

    pub fn writes(&self) -> u64 {
        self.messages.iter().map(|m| m.writes as u64).sum()
    }

    pub fn lookup_cost(&self) -> Cost {
        self.messages.iter().map(|m| m.lookup_cost).sum()
    }

    /// Node paths of messages of `kind`, rendered as names.
    pub fn named_paths(&self, tree: &HierarchyTree, kind: MessageKind) -> Vec<Vec<String>> {
        self.of_kind(kind)
            .map(|m| m.path.iter().map(|&n| tree.name(n).to_string()).collect())
            .collect()
    }
}

pub(crate) fn message(
    tree: &HierarchyTree,
    kind: MessageKind,
    path: Vec<NodeId>,
    reads: u32,
    writes: u32,
) -> Message {
    let hops = tree.path_cost(&path);
    Message {
        kind,
        from: path[0],
        to: *path.last().expect("non-empty path"),
        path,
        hops,
        reads,
        writes,
        lookup_cost: 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Hlr,
    WsHlr,
    Hier,
    WsHier,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Hlr, SchemeKind::WsHlr, SchemeKind::Hier, SchemeKind::WsHier];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Hlr => "hlr",
            SchemeKind::WsHlr => "ws-hlr",
            SchemeKind::Hier => "hier",
            SchemeKind::WsHier => "ws-hier",
        }
    }

    pub fn baseline(self) -> SchemeKind {
        match self {
            SchemeKind::Hlr | SchemeKind::WsHlr => SchemeKind::Hlr,
            SchemeKind::Hier | SchemeKind::WsHier => SchemeKind::Hier,
        }
    }

    pub fn is_working_set(self) -> bool {
        matches!(self, SchemeKind::WsHlr | SchemeKind::WsHier)
    }

    pub fn build(self, tree: Arc<HierarchyTree>, ws: &WsConfig) -> Box<dyn LocationScheme> {
        match self {
            SchemeKind::Hlr => Box::new(HlrScheme::baseline(tree)),
            SchemeKind::WsHlr => Box::new(HlrScheme::working_set(tree, ws.clone())),
            SchemeKind::Hier => Box::new(HierScheme::baseline(tree)),
            SchemeKind::WsHier => Box::new(HierScheme::working_set(tree, ws.clone())),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }
}

/// Common event interface of all schemes.
pub trait LocationScheme: Send {
    fn kind(&self) -> SchemeKind;

    /// Places a user at its starting zone, which also becomes its home.
    /// Costs nothing.
    fn register(&mut self, user: UserId, zone: NodeId, now: f64) -> Result<(), SchemeError>;

    fn on_move(&mut self, user: UserId, from: NodeId, to: NodeId, now: f64) -> Result<MessageLog, SchemeError>;

    fn on_call(&mut self, caller_zone: NodeId, callee: UserId, now: f64) -> Result<MessageLog, SchemeError>;

    fn current_zone(&self, user: UserId) -> Option<NodeId>;

    /// Sites currently holding an exact-location replica for `user`.
    fn replica_sites(&self, user: UserId) -> Vec<NodeId>;

    /// Checks every directory invariant of the scheme.
    fn check_invariants(&self) -> Result<(), SchemeError>;
}

pub(crate) fn check_zone(tree: &HierarchyTree, z: NodeId) -> Result<(), SchemeError> {
    if !tree.contains(z) {
        return Err(TopologyError::UnknownNode(z.to_string()).into());
    }
    if !tree.is_leaf(z) {
        return Err(SchemeError::NotAZone(z));
    }
    Ok(())
}
