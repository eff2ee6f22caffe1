use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::mobility::{emit_zone_crossings, initial_zones, matrix_walk, ImportedTrace, MobilityField, ZoneMove};
use crate::scenario::{Horizon, MobilitySpec, Scenario, TrafficSpec};
use crate::schemes::UserId;
use crate::topology::{NodeId, ZoneGrid};
use crate::traffic::{next_call_time, pick_callee, CallParams, CallRecord, PreferredSets, TrafficError};

const STREAM_SETUP: u64 = 0;
const STREAM_MOBILITY: u64 = 1;
const STREAM_CALLS: u64 = 2;
const STREAM_CALLEE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payload {
    Move { user: UserId, from: NodeId, to: NodeId },
    Call { caller: UserId, callee: UserId, caller_zone: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    pub(crate) fn digest(&self, h: &mut Sha256) {
        h.update(self.time.to_bits().to_le_bytes());
        h.update(self.seq.to_le_bytes());
        match self.payload {
            Payload::Move { user, from, to } => {
                h.update([0u8]);
                h.update(user.to_le_bytes());
                h.update(from.0.to_le_bytes());
                h.update(to.0.to_le_bytes());
            }
            Payload::Call {
                caller,
                callee,
                caller_zone,
            } => {
                h.update([1u8]);
                h.update(caller.to_le_bytes());
                h.update(callee.to_le_bytes());
                h.update(caller_zone.0.to_le_bytes());
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Due {
    UserMove(UserId),
    Tick,
    TraceMove(usize),
    UserCall(UserId),
    TraceCall(usize),
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    seq: u64,
    due: Due,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Reversed so the max-heap pops the earliest `(time, seq)`.
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        o.time.total_cmp(&self.time).then(o.seq.cmp(&self.seq))
    }
}

enum Moves {
    Matrix { grid: ZoneGrid, rate: Exp<f64> },
    Field { grid: ZoneGrid, field: Box<MobilityField> },
    Trace(Vec<ZoneMove>),
    Still,
}

enum Calls {
    Poisson { rate: f64, params: CallParams, sets: PreferredSets },
    Trace(Vec<CallRecord>),
}

/// Merged, time-ordered move and call stream of one run.
pub struct EventSource {
    zones: Vec<NodeId>,
    moves: Moves,
    calls: Calls,
    queue: BinaryHeap<Pending>,
    ready: VecDeque<Event>,
    seq: u64,
    emitted: u64,
    horizon: Horizon,
    mob_rng: ChaCha8Rng,
    call_rng: ChaCha8Rng,
    callee_rng: ChaCha8Rng,
    move_rate: f64,
    call_rate: f64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn zone_at(grid: &ZoneGrid, p: crate::mobility::Point) -> Result<NodeId, EngineError> {
    Ok(grid.zone_of(p.x, p.y)?)
}

fn field_zones(grid: &ZoneGrid, field: &MobilityField) -> Result<Vec<NodeId>, EngineError> {
    field.positions().into_iter().map(|p| zone_at(grid, p)).collect()
}

/// Zone changes per user per second over `duration`, on a copy of the field.
fn calibrate(grid: &ZoneGrid, field: &MobilityField, rng: &ChaCha8Rng, duration: f64) -> Result<f64, EngineError> {
    if field.is_empty() || duration <= 0.0 {
        return Ok(0.0);
    }
    let mut f = field.clone();
    let mut r = rng.clone();
    let mut zones = field_zones(grid, &f)?;
    let steps = (duration / f.step_time()).ceil().max(1.0) as u64;
    let mut crossings = 0u64;
    for _ in 0..steps {
        f.advance(&mut r)?;
        for (z, now) in zones.iter_mut().zip(field_zones(grid, &f)?) {
            if *z != now {
                crossings += 1;
                *z = now;
            }
        }
    }
    Ok(crossings as f64 / (f.len() as f64 * steps as f64 * f.step_time()))
}

fn time_span(times: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = times.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

fn trace_rate(moves: &[ZoneMove], users: usize, span: f64) -> f64 {
    if users == 0 || span <= 0.0 {
        0.0
    } else {
        moves.len() as f64 / (users as f64 * span)
    }
}

impl EventSource {
    pub fn new(sc: &Scenario) -> Result<Self, EngineError> {
        let users = sc.users;
        let mut setup = stream(sc.seed, STREAM_SETUP);
        let mut mob_rng = stream(sc.seed, STREAM_MOBILITY);
        let mut call_rng = stream(sc.seed, STREAM_CALLS);
        let callee_rng = stream(sc.seed, STREAM_CALLEE);
        let mut queue = BinaryHeap::new();
        let mut seq = 0u64;
        let mut push = |q: &mut BinaryHeap<Pending>, time: f64, due: Due| {
            q.push(Pending { time, seq, due });
            seq += 1;
        };

        let (zones, moves, move_rate) = match &sc.mobility {
            MobilitySpec::MatrixWalk { move_rate } => {
                let grid = sc.topology.grid()?.clone();
                let all = grid.zones();
                let zones: Vec<NodeId> = (0..users).map(|_| *all.choose(&mut setup).expect("grid has zones")).collect();
                if *move_rate > 0.0 {
                    let rate = Exp::new(*move_rate).map_err(|e| EngineError::Config(format!("move-rate: {e}")))?;
                    for u in 0..users {
                        let t = rate.sample(&mut mob_rng).max(f64::MIN_POSITIVE);
                        push(&mut queue, t, Due::UserMove(u as UserId));
                    }
                    (zones, Moves::Matrix { grid, rate }, *move_rate)
                } else {
                    (zones, Moves::Still, 0.0)
                }
            }
            MobilitySpec::Model {
                kind,
                params,
                calibration_time,
            } => {
                let grid = sc.topology.grid()?.clone();
                let field = MobilityField::new(*kind, params, users, &mut mob_rng)?;
                let zones = field_zones(&grid, &field)?;
                let rate = calibrate(&grid, &field, &mob_rng, *calibration_time)?;
                if users > 0 {
                    push(&mut queue, field.step_time(), Due::Tick);
                }
                (
                    zones,
                    Moves::Field {
                        grid,
                        field: Box::new(field),
                    },
                    rate,
                )
            }
            MobilitySpec::Trace(trace) => {
                let (start, moves, span) = match &**trace {
                    ImportedTrace::Positions { records, .. } => {
                        let grid = sc.topology.grid()?;
                        let start = initial_zones(records, grid)?;
                        let span = time_span(records.iter().map(|r| r.time));
                        (start, emit_zone_crossings(records, grid)?, span)
                    }
                    ImportedTrace::ZoneEvents(moves) => {
                        let mut start = std::collections::HashMap::new();
                        for m in moves {
                            start.entry(m.node).or_insert(m.from);
                        }
                        let span = time_span(moves.iter().map(|m| m.time));
                        (start, moves.clone(), span)
                    }
                };
                let mut moves = moves;
                moves.retain(|m| (m.node as usize) < users);
                moves.sort_by(|a, b| a.time.total_cmp(&b.time));
                let fallback = sc.topology.grid().map(|g| g.zones()).unwrap_or_else(|_| sc.topology.tree.leaves().to_vec());
                let zones = (0..users as u32)
                    .map(|u| {
                        start
                            .get(&u)
                            .copied()
                            .unwrap_or_else(|| *fallback.choose(&mut setup).expect("tree has leaves"))
                    })
                    .collect();
                for (i, m) in moves.iter().enumerate() {
                    push(&mut queue, m.time, Due::TraceMove(i));
                }
                let rate = trace_rate(&moves, users, span);
                (zones, Moves::Trace(moves), rate)
            }
        };

        let (calls, call_rate) = match &sc.traffic {
            TrafficSpec::Poisson(params) => {
                params.validate()?;
                let rate = params.effective_rate(move_rate);
                if users < 2 && rate > 0.0 {
                    return Err(TrafficError::PopulationTooSmall(users).into());
                }
                let sets = PreferredSets::assign(users, params.preferred_size, &mut setup);
                for u in 0..users {
                    if let Some(t) = next_call_time(0.0, rate, &mut call_rng) {
                        push(&mut queue, t, Due::UserCall(u as UserId));
                    }
                }
                (
                    Calls::Poisson {
                        rate,
                        params: params.clone(),
                        sets,
                    },
                    rate,
                )
            }
            TrafficSpec::Trace(records) => {
                let mut records = records.to_vec();
                records.retain(|c| (c.caller as usize) < users && (c.callee as usize) < users);
                records.sort_by(|a, b| a.time.total_cmp(&b.time));
                for (i, c) in records.iter().enumerate() {
                    push(&mut queue, c.time, Due::TraceCall(i));
                }
                let span = records.last().map_or(0.0, |c| c.time);
                let rate = if users > 0 && span > 0.0 {
                    records.len() as f64 / (users as f64 * span)
                } else {
                    0.0
                };
                (Calls::Trace(records), rate)
            }
        };

        Ok(Self {
            zones,
            moves,
            calls,
            queue,
            ready: VecDeque::new(),
            seq,
            emitted: 0,
            horizon: sc.horizon,
            mob_rng,
            call_rng,
            callee_rng,
            move_rate,
            call_rate,
        })
    }

    pub fn initial_zones(&self) -> &[NodeId] {
        &self.zones
    }

    /// Per-user move rate: configured, calibrated or measured from the trace.
    pub fn move_rate(&self) -> f64 {
        self.move_rate
    }

    pub fn call_rate(&self) -> f64 {
        self.call_rate
    }

    fn schedule(&mut self, time: f64, due: Due) {
        self.queue.push(Pending {
            time,
            seq: self.seq,
            due,
        });
        self.seq += 1;
    }

    fn within(&self, time: f64) -> bool {
        match self.horizon {
            Horizon::Events(n) => self.emitted < n,
            Horizon::Time(t) => time <= t,
        }
    }

    fn stamp(&mut self, time: f64, payload: Payload) -> Event {
        let ev = Event {
            time,
            seq: self.seq,
            payload,
        };
        self.seq += 1;
        ev
    }

    fn moved(&mut self, time: f64, user: UserId, to: NodeId) -> Option<Event> {
        let from = std::mem::replace(&mut self.zones[user as usize], to);
        (from != to).then(|| self.stamp(time, Payload::Move { user, from, to }))
    }

    fn expand(&mut self, p: Pending) -> Result<(), EngineError> {
        match p.due {
            Due::UserMove(u) => {
                let Moves::Matrix { grid, rate } = &self.moves else {
                    unreachable!("matrix move without matrix mobility")
                };
                let to = matrix_walk(self.zones[u as usize], grid, &mut self.mob_rng)?;
                let next = p.time + rate.sample(&mut self.mob_rng).max(f64::MIN_POSITIVE);
                self.schedule(next, Due::UserMove(u));
                if let Some(ev) = self.moved(p.time, u, to) {
                    self.ready.push_back(ev);
                }
            }
            Due::Tick => {
                let Moves::Field { grid, field } = &mut self.moves else {
                    unreachable!("tick without a mobility field")
                };
                field.advance(&mut self.mob_rng)?;
                let now = field_zones(grid, field)?;
                let dt = field.step_time();
                for (u, z) in now.into_iter().enumerate() {
                    if let Some(ev) = self.moved(p.time, u as UserId, z) {
                        self.ready.push_back(ev);
                    }
                }
                self.schedule(p.time + dt, Due::Tick);
            }
            Due::TraceMove(i) => {
                let Moves::Trace(moves) = &self.moves else {
                    unreachable!("trace move without a trace")
                };
                let m = moves[i];
                if let Some(ev) = self.moved(p.time, m.node, m.to) {
                    self.ready.push_back(ev);
                }
            }
            Due::UserCall(u) => {
                let Calls::Poisson { rate, params, sets } = &self.calls else {
                    unreachable!("poisson call without poisson traffic")
                };
                let callee = pick_callee(u, sets, params, &mut self.callee_rng)?;
                let next = next_call_time(p.time, *rate, &mut self.call_rng);
                if let Some(t) = next {
                    self.schedule(t, Due::UserCall(u));
                }
                let caller_zone = self.zones[u as usize];
                let ev = self.stamp(
                    p.time,
                    Payload::Call {
                        caller: u,
                        callee,
                        caller_zone,
                    },
                );
                self.ready.push_back(ev);
            }
            Due::TraceCall(i) => {
                let Calls::Trace(records) = &self.calls else {
                    unreachable!("trace call without a call trace")
                };
                let c = records[i];
                let caller_zone = self.zones[c.caller as usize];
                let ev = self.stamp(
                    p.time,
                    Payload::Call {
                        caller: c.caller,
                        callee: c.callee,
                        caller_zone,
                    },
                );
                self.ready.push_back(ev);
            }
        }
        Ok(())
    }

    /// Next event within the horizon, or `None` once it is reached or both
    /// streams are exhausted.
    pub fn next_event(&mut self) -> Result<Option<Event>, EngineError> {
        loop {
            if let Some(ev) = self.ready.pop_front() {
                if !self.within(ev.time) {
                    self.ready.clear();
                    self.queue.clear();
                    return Ok(None);
                }
                self.emitted += 1;
                return Ok(Some(ev));
            }
            let Some(p) = self.queue.pop() else {
                return Ok(None);
            };
            if !self.within(p.time) {
                self.queue.clear();
                return Ok(None);
            }
            self.expand(p)?;
        }
    }
}
