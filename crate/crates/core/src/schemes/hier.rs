//! Tree of location registers. Each ancestor of a user's zone points at the
//! child subtree holding the user; every other root points at the root
//! whose subtree does.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::working_set::{u_cost, ws_decide_with, ws_delta_hier, WorkingSetLedger, WsConfig};
use super::{check_zone, message, LocationScheme, LookupOutcome, Message, MessageKind, MessageLog, SchemeError, SchemeKind, UserId};
use crate::topology::{HierarchyTree, NodeId};

/// Directory entry for one user at one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pointer {
    /// The user is in this zone.
    Here,
    /// The user is somewhere below this child.
    Child(NodeId),
    /// The user is under this other root.
    Root(NodeId),
}

#[derive(Clone, Debug)]
struct WsState {
    cfg: WsConfig,
    ledger: WorkingSetLedger,
    /// user -> site -> leaf stored at the site.
    replicas: BTreeMap<UserId, BTreeMap<NodeId, NodeId>>,
}

#[derive(Clone, Debug)]
pub struct HierScheme {
    tree: Arc<HierarchyTree>,
    dir: Vec<BTreeMap<UserId, Pointer>>,
    current: BTreeMap<UserId, NodeId>,
    ws: Option<WsState>,
}

/// Route of a baseline call lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Walk {
    /// Caller zone up to the first node holding a pointer, all read.
    up: Vec<NodeId>,
    /// Bus transit between roots, both ends included, nothing read.
    bus: Option<Vec<NodeId>>,
    /// Nodes read on the way down, ending at the callee's zone.
    down: Vec<NodeId>,
}

impl Walk {
    /// Every node read, in order.
    fn reads(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.up.iter().chain(&self.down).copied()
    }

    /// The walk cut short right after its `i`-th read.
    fn truncated(&self, i: usize) -> Walk {
        if i < self.up.len() {
            Walk {
                up: self.up[..=i].to_vec(),
                bus: None,
                down: Vec::new(),
            }
        } else {
            Walk {
                up: self.up.clone(),
                bus: self.bus.clone(),
                down: self.down[..=i - self.up.len()].to_vec(),
            }
        }
    }
}

impl HierScheme {
    pub fn baseline(tree: Arc<HierarchyTree>) -> Self {
        let n = tree.len();
        Self {
            tree,
            dir: vec![BTreeMap::new(); n],
            current: BTreeMap::new(),
            ws: None,
        }
    }

    pub fn working_set(tree: Arc<HierarchyTree>, cfg: WsConfig) -> Self {
        let mut s = Self::baseline(tree);
        s.ws = Some(WsState {
            ledger: WorkingSetLedger::new(cfg.ewma_alpha),
            cfg,
            replicas: BTreeMap::new(),
        });
        s
    }

    pub fn pointer(&self, node: NodeId, user: UserId) -> Option<Pointer> {
        self.dir.get(node.index())?.get(&user).copied()
    }

    /// Nodes that may not hold a replica while the user sits in `zone`.
    fn barred(&self, zone: NodeId, s: NodeId) -> bool {
        s == zone || Some(s) == self.tree.parent(zone)
    }

    /// Writes the pointer chain from `zone` up to (and including) `top`.
    fn write_chain(&mut self, user: UserId, zone: NodeId, top: NodeId) {
        let mut below = None;
        for n in self.tree.ancestors(zone) {
            let p = match below {
                None => Pointer::Here,
                Some(c) => Pointer::Child(c),
            };
            self.dir[n.index()].insert(user, p);
            if n == top {
                break;
            }
            below = Some(n);
        }
    }

    /// Deletes entries from `zone` upward, stopping below `top`.
    fn clear_chain(&mut self, user: UserId, zone: NodeId, top: NodeId) {
        let path: Vec<NodeId> = self.tree.ancestors(zone).take_while(|&n| n != top).collect();
        for n in path {
            self.dir[n.index()].remove(&user);
        }
    }

    /// Baseline lookup route for `callee` starting at `caller_zone`.
    fn lookup_walk(&self, caller_zone: NodeId, callee: UserId) -> Result<Walk, SchemeError> {
        let tree = &*self.tree;
        let fail = |detail: String| SchemeError::LookupFailure { user: callee, detail };
        let mut up = Vec::new();
        let mut found = None;
        for n in tree.ancestors(caller_zone) {
            up.push(n);
            if let Some(p) = self.pointer(n, callee) {
                found = Some((n, p));
                break;
            }
        }
        let (top, p) = found.ok_or_else(|| fail(format!("no pointer on the way up from {caller_zone}")))?;
        let mut down = Vec::new();
        let mut bus = None;
        let (mut at, mut next) = (top, p);
        if let Pointer::Root(r) = p {
            bus = Some(tree.bus_path(top, r));
            down.push(r);
            at = r;
            next = self.pointer(r, callee).ok_or_else(|| fail(format!("root {r} has no entry")))?;
        }
        for _ in 0..tree.len() {
            match next {
                Pointer::Here => return Ok(Walk { up, bus, down }),
                Pointer::Child(c) if tree.parent(c) == Some(at) => {
                    down.push(c);
                    at = c;
                    next = self.pointer(c, callee).ok_or_else(|| fail(format!("broken chain at {c}")))?;
                }
                other => return Err(fail(format!("bad pointer {other:?} at {at}"))),
            }
        }
        Err(fail("pointer loop".into()))
    }

    /// Lookup messages of a walk; `lookup_cost` counts traversed links.
    fn walk_messages(&self, w: &Walk) -> Vec<Message> {
        let tree = &*self.tree;
        let mut out = Vec::new();
        let mut push = |path: Vec<NodeId>, reads: u32| {
            let mut m = message(tree, MessageKind::Lookup, path, reads, 0);
            m.lookup_cost = m.path.len() as u64 - 1;
            out.push(m);
        };
        push(w.up.clone(), w.up.len() as u32);
        let top = *w.up.last().expect("walk starts at the caller zone");
        match &w.bus {
            Some(bus) => {
                push(bus.clone(), 0);
                if !w.down.is_empty() {
                    push(w.down.clone(), w.down.len() as u32);
                }
            }
            None if !w.down.is_empty() => {
                let mut path = vec![top];
                path.extend(&w.down);
                push(path, w.down.len() as u32);
            }
            None => {}
        }
        out
    }

    fn reconcile(&mut self, user: UserId, sources: &[NodeId], now: f64, log: &mut MessageLog) {
        let Some(cur) = self.current.get(&user).copied() else { return };
        let barred: Vec<bool> = sources.iter().map(|&s| self.barred(cur, s)).collect();
        let Some(ws) = self.ws.as_mut() else { return };
        if ws.cfg.disabled {
            return;
        }
        let tree = &*self.tree;
        let sites = ws.replicas.entry(user).or_default();
        for (&s, barred) in sources.iter().zip(barred) {
            let keep = !barred
                && match ws.ledger.rates(user, s, now) {
                    Some((f_s, f_u)) => {
                        let delta = ws_delta_hier(tree, s, cur).expect("nodes belong to the tree") as f64;
                        let upkeep = u_cost(tree, cur, s, ws.cfg.u_cost_mode) as f64;
                        ws_decide_with(ws.cfg.strict_boundary, f_s, delta, f_u, upkeep)
                    }
                    None => sites.contains_key(&s),
                };
            if keep && sites.get(&s) != Some(&cur) {
                sites.insert(s, cur);
                log.messages.push(message(tree, MessageKind::ReplicaUpdate, tree.path_unchecked(cur, s), 0, 1));
            } else if !keep && sites.contains_key(&s) {
                sites.remove(&s);
                log.messages.push(message(tree, MessageKind::Invalidate, tree.path_unchecked(cur, s), 0, 1));
            }
        }
    }
}

impl LocationScheme for HierScheme {
    fn kind(&self) -> SchemeKind {
        if self.ws.is_some() {
            SchemeKind::WsHier
        } else {
            SchemeKind::Hier
        }
    }

    fn register(&mut self, user: UserId, zone: NodeId, now: f64) -> Result<(), SchemeError> {
        check_zone(&self.tree, zone)?;
        if self.current.contains_key(&user) {
            return Err(SchemeError::AlreadyRegistered(user));
        }
        let root = self.tree.root_of(zone);
        self.write_chain(user, zone, root);
        for &r in self.tree.roots() {
            if r != root {
                self.dir[r.index()].insert(user, Pointer::Root(root));
            }
        }
        self.current.insert(user, zone);
        if let Some(ws) = self.ws.as_mut() {
            ws.ledger.activate(user, now);
        }
        Ok(())
    }

    fn on_move(&mut self, user: UserId, from: NodeId, to: NodeId, now: f64) -> Result<MessageLog, SchemeError> {
        check_zone(&self.tree, to)?;
        let recorded = *self.current.get(&user).ok_or(SchemeError::UnknownUser(user))?;
        if recorded != from {
            return Err(SchemeError::StaleMove { user, claimed: from, recorded });
        }
        let mut log = MessageLog::default();
        if from == to {
            return Ok(log);
        }
        let tree = self.tree.clone();
        match tree.lca(from, to)? {
            Some(top) => {
                let up = tree.path_unchecked(to, top);
                let writes = up.len() as u32;
                log.messages.push(message(&tree, MessageKind::Update, up, 0, writes));
                let down = tree.path_unchecked(top, from);
                let deletes = down.len() as u32 - 1;
                log.messages.push(message(&tree, MessageKind::Deregister, down, 0, deletes));
                self.write_chain(user, to, top);
                self.clear_chain(user, from, top);
            }
            None => {
                let (rt, rf) = (tree.root_of(to), tree.root_of(from));
                let up = tree.path_unchecked(to, rt);
                let writes = up.len() as u32;
                log.messages.push(message(&tree, MessageKind::Update, up, 0, writes));
                let roots = tree.roots();
                let first = roots[0];
                let last = *roots.last().expect("at least one root");
                // The new root announces itself toward both ends of the bus.
                for end in [last, first] {
                    if end != rt {
                        let path = tree.bus_path(rt, end);
                        let writes = path.len() as u32 - 1;
                        log.messages.push(message(&tree, MessageKind::Update, path, 0, writes));
                    }
                }
                let down = tree.path_unchecked(rf, from);
                let deletes = down.len() as u32 - 1;
                log.messages.push(message(&tree, MessageKind::Deregister, down, 0, deletes));
                self.write_chain(user, to, rt);
                self.clear_chain(user, from, rf);
                for &r in roots {
                    if r != rt {
                        self.dir[r.index()].insert(user, Pointer::Root(rt));
                    }
                }
            }
        }
        self.current.insert(user, to);
        if let Some(ws) = self.ws.as_mut() {
            ws.ledger.record_move(user, now);
            let sources = ws.ledger.sources(user);
            self.reconcile(user, &sources, now, &mut log);
        }
        Ok(log)
    }

    fn on_call(&mut self, caller_zone: NodeId, callee: UserId, now: f64) -> Result<MessageLog, SchemeError> {
        check_zone(&self.tree, caller_zone)?;
        let cur = *self.current.get(&callee).ok_or(SchemeError::UnknownUser(callee))?;
        let tree = self.tree.clone();
        let mut log = MessageLog::default();
        if self.pointer(caller_zone, callee) == Some(Pointer::Here) {
            log.messages.push(message(&tree, MessageKind::Lookup, vec![caller_zone], 1, 0));
            log.lookup = Some(LookupOutcome { local: true });
            return Ok(log);
        }
        let walk = self.lookup_walk(caller_zone, callee)?;
        let sites = self
            .ws
            .as_ref()
            .filter(|ws| !ws.cfg.disabled)
            .and_then(|ws| ws.replicas.get(&callee));
        let hit = sites.and_then(|sites| {
            walk.reads()
                .enumerate()
                .find_map(|(i, v)| sites.get(&v).map(|&stored| (i, v, stored)))
        });
        let faced: Vec<NodeId> = match hit {
            Some((i, v, stored)) => {
                if stored != cur {
                    return Err(SchemeError::LookupFailure {
                        user: callee,
                        detail: format!("stale replica at {v}"),
                    });
                }
                let cut = walk.truncated(i);
                log.messages = self.walk_messages(&cut);
                // The replica holder contacts the callee's zone directly.
                let mut deliver = message(&tree, MessageKind::CallDelivery, tree.path_unchecked(v, cur), 1, 0);
                deliver.lookup_cost = 2;
                log.messages.push(deliver);
                log.lookup = Some(LookupOutcome { local: v == caller_zone });
                cut.reads().collect()
            }
            None => {
                log.messages = self.walk_messages(&walk);
                log.lookup = Some(LookupOutcome { local: false });
                walk.reads().collect()
            }
        };
        if let Some(ws) = self.ws.as_mut() {
            for &n in &faced {
                ws.ledger.record_call(callee, n, now);
            }
            self.reconcile(callee, &faced, now, &mut log);
        }
        Ok(log)
    }

    fn current_zone(&self, user: UserId) -> Option<NodeId> {
        self.current.get(&user).copied()
    }

    fn replica_sites(&self, user: UserId) -> Vec<NodeId> {
        self.ws
            .as_ref()
            .and_then(|ws| ws.replicas.get(&user))
            .map(|s| s.keys().copied().collect())
            .unwrap_or_default()
    }

    fn check_invariants(&self) -> Result<(), SchemeError> {
        let tree = &*self.tree;
        let bad = |msg: String| Err(SchemeError::Invariant(msg));
        for (&u, &cur) in &self.current {
            for &r in tree.roots() {
                let Some(mut p) = self.pointer(r, u) else {
                    return bad(format!("root {} has no entry for user {u}", tree.name(r)));
                };
                let mut at = r;
                if let Pointer::Root(other) = p {
                    if tree.bus_position(other).is_none() || other == r {
                        return bad(format!("root {} points at {other} for user {u}", tree.name(r)));
                    }
                    at = other;
                    p = match self.pointer(other, u) {
                        Some(q @ (Pointer::Here | Pointer::Child(_))) => q,
                        q => return bad(format!("root {} holds {q:?} for user {u}", tree.name(other))),
                    };
                }
                for _ in 0..=tree.len() {
                    match p {
                        Pointer::Here => break,
                        Pointer::Child(c) if tree.parent(c) == Some(at) => {
                            at = c;
                            p = match self.pointer(c, u) {
                                Some(q) => q,
                                None => return bad(format!("chain for user {u} breaks at {}", tree.name(c))),
                            };
                        }
                        q => return bad(format!("{} holds {q:?} for user {u}", tree.name(at))),
                    }
                }
                if at != cur || p != Pointer::Here {
                    return bad(format!(
                        "pointers from root {} lead user {u} to {}, not {}",
                        tree.name(r),
                        tree.name(at),
                        tree.name(cur)
                    ));
                }
            }
            let here = tree
                .leaves()
                .iter()
                .filter(|l| self.pointer(**l, u) == Some(Pointer::Here))
                .count();
            if here != 1 {
                return bad(format!("user {u} is here at {here} leaves"));
            }
            for n in tree.nodes() {
                if tree.bus_position(n).is_none() && self.pointer(n, u).is_some() && !tree.ancestors(cur).any(|a| a == n) {
                    return bad(format!("stale entry for user {u} at {}", tree.name(n)));
                }
            }
            if let Some(sites) = self.ws.as_ref().and_then(|ws| ws.replicas.get(&u)) {
                for (&s, &z) in sites {
                    if z != cur {
                        return bad(format!("replica of user {u} at {} stores {}", tree.name(s), tree.name(z)));
                    }
                    if self.barred(cur, s) {
                        return bad(format!("replica of user {u} at barred node {}", tree.name(s)));
                    }
                }
            }
        }
        Ok(())
    }
}
