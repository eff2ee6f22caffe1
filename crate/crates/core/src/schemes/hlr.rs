//! Two-level scheme: every user has a fixed home register that always knows
//! the visitor register currently serving it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::working_set::{u_cost, ws_decide_with, ws_delta_hlr, WorkingSetLedger, WsConfig};
use super::{check_zone, message, LocationScheme, LookupOutcome, MessageKind, MessageLog, SchemeError, SchemeKind, UserId};
use crate::topology::{HierarchyTree, NodeId};

#[derive(Clone, Debug)]
struct UserRecord {
    home: NodeId,
    current: NodeId,
}

#[derive(Clone, Debug)]
struct WsState {
    cfg: WsConfig,
    ledger: WorkingSetLedger,
    /// user -> site -> zone stored at the site.
    replicas: BTreeMap<UserId, BTreeMap<NodeId, NodeId>>,
}

/// Home/visitor register scheme, optionally with working-set replicas at
/// caller zones.
#[derive(Clone, Debug)]
pub struct HlrScheme {
    tree: Arc<HierarchyTree>,
    users: BTreeMap<UserId, UserRecord>,
    /// Visitor register contents per zone.
    vlr: BTreeMap<NodeId, BTreeSet<UserId>>,
    /// What each user's home register believes is the serving zone.
    hlr: BTreeMap<UserId, NodeId>,
    ws: Option<WsState>,
}

impl HlrScheme {
    pub fn baseline(tree: Arc<HierarchyTree>) -> Self {
        Self {
            tree,
            users: BTreeMap::new(),
            vlr: BTreeMap::new(),
            hlr: BTreeMap::new(),
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

    pub fn home(&self, user: UserId) -> Option<NodeId> {
        self.users.get(&user).map(|u| u.home)
    }

    fn record(&self, user: UserId) -> Result<&UserRecord, SchemeError> {
        self.users.get(&user).ok_or(SchemeError::UnknownUser(user))
    }

    /// Re-runs the decision for `user` at each listed source and emits the
    /// replica traffic it implies, sent from the user's current zone.
    fn reconcile(&mut self, user: UserId, sources: &[NodeId], now: f64, log: &mut MessageLog) {
        let Some(ws) = self.ws.as_mut() else { return };
        if ws.cfg.disabled {
            return;
        }
        let rec = &self.users[&user];
        let (home, cur) = (rec.home, rec.current);
        let tree = &*self.tree;
        let sites = ws.replicas.entry(user).or_default();
        for &s in sources {
            let Some((f_s, f_u)) = ws.ledger.rates(user, s, now) else { continue };
            let delta = ws_delta_hlr(tree, s, home, cur).expect("zones belong to the tree") as f64;
            let upkeep = u_cost(tree, cur, s, ws.cfg.u_cost_mode) as f64;
            let keep = ws_decide_with(ws.cfg.strict_boundary, f_s, delta, f_u, upkeep);
            let held = sites.contains_key(&s);
            if keep && sites.get(&s) != Some(&cur) {
                sites.insert(s, cur);
                log.messages.push(message(tree, MessageKind::ReplicaUpdate, tree.path_unchecked(cur, s), 0, 1));
            } else if !keep && held {
                sites.remove(&s);
                log.messages.push(message(tree, MessageKind::Invalidate, tree.path_unchecked(cur, s), 0, 1));
            }
        }
    }
}

impl LocationScheme for HlrScheme {
    fn kind(&self) -> SchemeKind {
        if self.ws.is_some() {
            SchemeKind::WsHlr
        } else {
            SchemeKind::Hlr
        }
    }

    fn register(&mut self, user: UserId, zone: NodeId, now: f64) -> Result<(), SchemeError> {
        check_zone(&self.tree, zone)?;
        if self.users.contains_key(&user) {
            return Err(SchemeError::AlreadyRegistered(user));
        }
        self.users.insert(user, UserRecord { home: zone, current: zone });
        self.vlr.entry(zone).or_default().insert(user);
        self.hlr.insert(user, zone);
        if let Some(ws) = self.ws.as_mut() {
            ws.ledger.activate(user, now);
        }
        Ok(())
    }

    fn on_move(&mut self, user: UserId, from: NodeId, to: NodeId, now: f64) -> Result<MessageLog, SchemeError> {
        check_zone(&self.tree, to)?;
        let rec = self.record(user)?;
        if rec.current != from {
            return Err(SchemeError::StaleMove {
                user,
                claimed: from,
                recorded: rec.current,
            });
        }
        let mut log = MessageLog::default();
        if from == to {
            return Ok(log);
        }
        let home = rec.home;
        let tree = &*self.tree;
        // New visitor register plus the home register.
        log.messages.push(message(tree, MessageKind::Update, tree.path_unchecked(to, home), 0, 2));
        log.messages.push(message(tree, MessageKind::Deregister, tree.path_unchecked(home, from), 0, 1));
        if let Some(set) = self.vlr.get_mut(&from) {
            set.remove(&user);
        }
        self.vlr.entry(to).or_default().insert(user);
        self.hlr.insert(user, to);
        self.users.get_mut(&user).expect("checked").current = to;
        if let Some(ws) = self.ws.as_mut() {
            ws.ledger.record_move(user, now);
            let sources = ws.ledger.sources(user);
            self.reconcile(user, &sources, now, &mut log);
        }
        Ok(log)
    }

    fn on_call(&mut self, caller_zone: NodeId, callee: UserId, now: f64) -> Result<MessageLog, SchemeError> {
        check_zone(&self.tree, caller_zone)?;
        let rec = self.record(callee)?;
        let (home, cur) = (rec.home, rec.current);
        let tree = &*self.tree;
        let mut log = MessageLog::default();
        let replica = self
            .ws
            .as_ref()
            .filter(|ws| !ws.cfg.disabled)
            .and_then(|ws| ws.replicas.get(&callee))
            .and_then(|sites| sites.get(&caller_zone).copied());
        if let Some(stored) = replica {
            if stored != cur {
                return Err(SchemeError::LookupFailure {
                    user: callee,
                    detail: format!("stale replica at {caller_zone}"),
                });
            }
            let mut hit = message(tree, MessageKind::Lookup, vec![caller_zone], 1, 0);
            hit.lookup_cost = 0;
            let mut deliver = message(tree, MessageKind::CallDelivery, tree.path_unchecked(caller_zone, cur), 1, 0);
            deliver.lookup_cost = deliver.hops;
            log.messages.push(hit);
            log.messages.push(deliver);
            log.lookup = Some(LookupOutcome { local: true });
        } else {
            let served = *self.hlr.get(&callee).ok_or(SchemeError::LookupFailure {
                user: callee,
                detail: "no home register entry".into(),
            })?;
            if !self.vlr.get(&served).is_some_and(|s| s.contains(&callee)) {
                return Err(SchemeError::LookupFailure {
                    user: callee,
                    detail: format!("home register points at {served}, which does not serve the user"),
                });
            }
            // Caller's visitor register and the home register are both read.
            let mut ask = message(tree, MessageKind::Lookup, tree.path_unchecked(caller_zone, home), 2, 0);
            ask.lookup_cost = ask.hops;
            let mut forward = message(tree, MessageKind::Lookup, tree.path_unchecked(home, served), 1, 0);
            forward.lookup_cost = forward.hops;
            log.messages.push(ask);
            log.messages.push(forward);
            log.lookup = Some(LookupOutcome { local: caller_zone == home });
        }
        if let Some(ws) = self.ws.as_mut() {
            ws.ledger.record_call(callee, caller_zone, now);
            self.reconcile(callee, &[caller_zone], now, &mut log);
        }
        Ok(log)
    }

    fn current_zone(&self, user: UserId) -> Option<NodeId> {
        self.users.get(&user).map(|u| u.current)
    }

    fn replica_sites(&self, user: UserId) -> Vec<NodeId> {
        self.ws
            .as_ref()
            .and_then(|ws| ws.replicas.get(&user))
            .map(|s| s.keys().copied().collect())
            .unwrap_or_default()
    }

    fn check_invariants(&self) -> Result<(), SchemeError> {
        let bad = |msg: String| Err(SchemeError::Invariant(msg));
        for (&u, rec) in &self.users {
            if self.hlr.get(&u) != Some(&rec.current) {
                return bad(format!("home register of user {u} does not point at {}", rec.current));
            }
            let holders: Vec<NodeId> = self
                .vlr
                .iter()
                .filter(|(_, set)| set.contains(&u))
                .map(|(z, _)| *z)
                .collect();
            if holders != [rec.current] {
                return bad(format!("user {u} held by visitor registers {holders:?}"));
            }
            if let Some(sites) = self.ws.as_ref().and_then(|ws| ws.replicas.get(&u)) {
                for (s, z) in sites {
                    if *z != rec.current {
                        return bad(format!("replica of user {u} at {s} stores {z}, not {}", rec.current));
                    }
                    if !self.tree.is_leaf(*s) {
                        return bad(format!("replica of user {u} at non-zone {s}"));
                    }
                }
            }
        }
        Ok(())
    }
}
