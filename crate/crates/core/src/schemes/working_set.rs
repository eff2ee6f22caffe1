//! Adaptive replication: per-source call rates against the user's move
//! rate, weighed by routing saving and replica upkeep.

use std::collections::BTreeMap;

use super::{SchemeError, UserId};
use crate::topology::{Cost, HierarchyTree, NodeId};

/// How replica upkeep is charged when deciding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UCostMode {
    /// Announce plus invalidate: twice the path cost.
    #[default]
    Symmetric,
    AnnounceOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WsConfig {
    /// Smoothing of inter-event intervals; `None` uses cumulative counts.
    pub ewma_alpha: Option<f64>,
    pub u_cost_mode: UCostMode,
    /// Equal sides do not replicate when true.
    pub strict_boundary: bool,
    /// Forces the candidate set empty.
    pub disabled: bool,
}

impl Default for WsConfig {
    fn default() -> Self {
        Self {
            ewma_alpha: None,
            u_cost_mode: UCostMode::Symmetric,
            strict_boundary: true,
            disabled: false,
        }
    }
}

/// Replicate at `s` iff `f_s * delta_s > f_update * u_s`.
pub fn ws_decide(f_s: f64, delta_s: f64, f_update: f64, u_s: f64) -> bool {
    ws_decide_with(true, f_s, delta_s, f_update, u_s)
}

pub fn ws_decide_with(strict: bool, f_s: f64, delta_s: f64, f_update: f64, u_s: f64) -> bool {
    let routing = f_s * delta_s;
    let upkeep = f_update * u_s;
    if strict {
        routing > upkeep
    } else {
        routing >= upkeep
    }
}

/// Per-call saving of a replica at `s` when the alternative is a detour
/// through the home register.
pub fn ws_delta_hlr(tree: &HierarchyTree, s: NodeId, home: NodeId, callee_zone: NodeId) -> Result<Cost, SchemeError> {
    let via_home = tree.cost(s, home)? + tree.cost(home, callee_zone)?;
    let direct = tree.cost(s, callee_zone)?;
    Ok(via_home.saturating_sub(direct))
}

/// Per-call saving, in lookup messages, of a replica at `s` in the
/// hierarchy: the lookup walk from `s` is replaced by two messages.
pub fn ws_delta_hier(tree: &HierarchyTree, s: NodeId, callee_zone: NodeId) -> Result<Cost, SchemeError> {
    Ok(tree.hop_count(s, callee_zone)?.saturating_sub(2))
}

pub fn u_cost(tree: &HierarchyTree, current: NodeId, s: NodeId, mode: UCostMode) -> Cost {
    let one = tree.cost_unchecked(current, s);
    match mode {
        UCostMode::Symmetric => 2 * one,
        UCostMode::AnnounceOnly => one,
    }
}

#[derive(Clone, Debug, PartialEq)]
struct EventRate {
    count: u64,
    last: f64,
    /// Smoothed inter-event interval.
    gap: Option<f64>,
}

impl EventRate {
    fn new() -> Self {
        Self {
            count: 0,
            last: f64::NAN,
            gap: None,
        }
    }

    fn record(&mut self, now: f64, since: f64, alpha: Option<f64>) {
        if let Some(a) = alpha {
            let interval = if self.count == 0 { now - since } else { now - self.last };
            self.gap = Some(match self.gap {
                None => interval,
                Some(g) => a * interval + (1.0 - a) * g,
            });
        }
        self.count += 1;
        self.last = now;
    }

    fn rate(&self, now: f64, since: f64, alpha: Option<f64>) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        match alpha {
            None => {
                let elapsed = now - since;
                (elapsed > 0.0).then(|| self.count as f64 / elapsed)
            }
            Some(_) => {
                let g = self.gap?.max(now - self.last);
                (g > 0.0).then(|| 1.0 / g)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct UserLedger {
    activation: f64,
    moves: EventRate,
    sources: BTreeMap<NodeId, EventRate>,
}

/// Per-(user, source) counters feeding the replication decision.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkingSetLedger {
    alpha: Option<f64>,
    users: BTreeMap<UserId, UserLedger>,
}

impl WorkingSetLedger {
    pub fn new(alpha: Option<f64>) -> Self {
        Self {
            alpha,
            users: BTreeMap::new(),
        }
    }

    pub fn activate(&mut self, user: UserId, now: f64) {
        self.users.insert(
            user,
            UserLedger {
                activation: now,
                moves: EventRate::new(),
                sources: BTreeMap::new(),
            },
        );
    }

    pub fn record_move(&mut self, user: UserId, now: f64) {
        let a = self.alpha;
        if let Some(u) = self.users.get_mut(&user) {
            u.moves.record(now, u.activation, a);
        }
    }

    pub fn record_call(&mut self, user: UserId, source: NodeId, now: f64) {
        let a = self.alpha;
        if let Some(u) = self.users.get_mut(&user) {
            let since = u.activation;
            u.sources.entry(source).or_insert_with(EventRate::new).record(now, since, a);
        }
    }

    /// Sources with at least one call on record, in id order.
    pub fn sources(&self, user: UserId) -> Vec<NodeId> {
        self.users
            .get(&user)
            .map(|u| u.sources.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn call_count(&self, user: UserId, source: NodeId) -> u64 {
        self.users
            .get(&user)
            .and_then(|u| u.sources.get(&source))
            .map_or(0, |r| r.count)
    }

    pub fn move_count(&self, user: UserId) -> u64 {
        self.users.get(&user).map_or(0, |u| u.moves.count)
    }

    /// `(f_s, f_update)` once the source has a call and the user a move;
    /// `None` during warm-up.
    pub fn rates(&self, user: UserId, source: NodeId, now: f64) -> Option<(f64, f64)> {
        let u = self.users.get(&user)?;
        let f_s = u.sources.get(&source)?.rate(now, u.activation, self.alpha)?;
        let f_u = u.moves.rate(now, u.activation, self.alpha)?;
        Some((f_s, f_u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    #[test]
    fn decision_examples() {
        assert!(ws_decide(0.5, 6.0, 0.2, 10.0));
        assert!(!ws_decide(0.5, 4.0, 0.2, 10.0));
        assert!(ws_decide_with(false, 0.5, 4.0, 0.2, 10.0));
        assert!(!ws_decide(0.0, 100.0, 0.1, 1.0));
    }

    #[test]
    fn delta_examples() {
        let topo = Topology::canonical();
        let t = &topo.tree;
        let n = |s| t.id(s).unwrap();
        assert_eq!(ws_delta_hlr(t, n("a"), n("d"), n("e")).unwrap(), 6);
        assert_eq!(ws_delta_hlr(t, n("d"), n("d"), n("e")).unwrap(), 0);
        assert_eq!(ws_delta_hlr(t, n("a"), n("d"), n("d")).unwrap(), 0);
        assert_eq!(ws_delta_hier(t, n("a"), n("e")).unwrap(), 7);
        assert_eq!(ws_delta_hier(t, n("l"), n("e")).unwrap(), 0);
        assert_eq!(ws_delta_hier(t, n("k"), n("e")).unwrap(), 0);
        assert_eq!(ws_delta_hier(t, n("l2"), n("e")).unwrap(), 1);
    }

    #[test]
    fn warm_up_needs_call_and_move() {
        let mut l = WorkingSetLedger::new(None);
        let s = NodeId(3);
        l.activate(0, 0.0);
        assert_eq!(l.rates(0, s, 5.0), None);
        l.record_call(0, s, 1.0);
        assert_eq!(l.rates(0, s, 5.0), None);
        l.record_move(0, 2.0);
        assert_eq!(l.rates(0, s, 4.0), Some((0.25, 0.25)));
        l.record_call(0, s, 3.0);
        assert_eq!(l.rates(0, s, 4.0), Some((0.5, 0.25)));
    }

    #[test]
    fn ewma_rates_track_recent_gaps() {
        let mut l = WorkingSetLedger::new(Some(0.5));
        let s = NodeId(1);
        l.activate(0, 0.0);
        l.record_call(0, s, 4.0);
        l.record_call(0, s, 6.0);
        l.record_move(0, 10.0);
        // Call gap 0.5*2 + 0.5*4 = 3, but 4 s have passed since the last call.
        let (f_s, f_u) = l.rates(0, s, 10.0).unwrap();
        assert_eq!(f_s, 0.25);
        assert_eq!(f_u, 0.1);
    }
}
