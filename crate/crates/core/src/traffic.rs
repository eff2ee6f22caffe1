//! Call arrivals and callee selection.

use std::io::{self, Write};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

pub const CALLTRACE_HEADER: &str = "#calltrace v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("population of {0} cannot place calls")]
    PopulationTooSmall(usize),
    #[error("{key} out of range: {detail}")]
    OutOfRange { key: &'static str, detail: String },
    #[error("call trace line {line}: {msg}")]
    Trace { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CallParams {
    /// Calls per second per user. Ignored when `cmr` is set.
    pub call_rate: f64,
    pub preferred_size: usize,
    pub preferred_prob: f64,
    /// Calls per move; the engine derives the call rate from the move rate.
    pub cmr: Option<f64>,
}

impl Default for CallParams {
    fn default() -> Self {
        Self {
            call_rate: 0.01,
            preferred_size: 5,
            preferred_prob: 0.8,
            cmr: None,
        }
    }
}

impl CallParams {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.call_rate >= 0.0 && self.call_rate.is_finite()) {
            return Err(TrafficError::OutOfRange {
                key: "call_rate",
                detail: format!("{} must be non-negative", self.call_rate),
            });
        }
        if self.preferred_size == 0 {
            return Err(TrafficError::OutOfRange {
                key: "preferred_size",
                detail: "must be at least 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.preferred_prob) {
            return Err(TrafficError::OutOfRange {
                key: "preferred_prob",
                detail: format!("{} not in [0, 1]", self.preferred_prob),
            });
        }
        if let Some(c) = self.cmr {
            if !(c > 0.0 && c.is_finite()) {
                return Err(TrafficError::OutOfRange {
                    key: "cmr",
                    detail: format!("{c} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// Per-user call rate given the per-user move rate.
    pub fn effective_rate(&self, move_rate: f64) -> f64 {
        match self.cmr {
            Some(c) => c * move_rate,
            None => self.call_rate,
        }
    }
}

/// Time of the next call after `now`, or `None` when `rate` is zero.
pub fn next_call_time<R: Rng + ?Sized>(now: f64, rate: f64, rng: &mut R) -> Option<f64> {
    if !(rate > 0.0) {
        return None;
    }
    let gap: f64 = Exp::new(rate).expect("positive rate").sample(rng);
    // Exp can return exactly 0 with vanishing probability; keep arrivals strictly after now.
    Some(now + gap.max(f64::MIN_POSITIVE))
}

/// Each user's fixed set of frequent callees, drawn once per run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreferredSets(Vec<Vec<u32>>);

impl PreferredSets {
    /// `k` distinct peers per user, never the user itself. Users with fewer
    /// than `k` peers get all of them.
    pub fn assign<R: Rng + ?Sized>(population: usize, k: usize, rng: &mut R) -> Self {
        let sets = (0..population)
            .map(|u| {
                let others = population.saturating_sub(1);
                let mut set: Vec<u32> = sample(rng, others, k.min(others))
                    .into_iter()
                    .map(|i| if i >= u { i as u32 + 1 } else { i as u32 })
                    .collect();
                set.sort_unstable();
                set
            })
            .collect();
        Self(sets)
    }

    pub fn from_sets(sets: Vec<Vec<u32>>) -> Self {
        Self(sets)
    }

    pub fn of(&self, user: u32) -> &[u32] {
        &self.0[user as usize]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// With probability `preferred_prob` a uniform member of the caller's
/// preferred set, otherwise a uniform member of everyone else.
pub fn pick_callee<R: Rng + ?Sized>(
    caller: u32,
    sets: &PreferredSets,
    params: &CallParams,
    rng: &mut R,
) -> Result<u32, TrafficError> {
    let n = sets.len();
    if n < 2 {
        return Err(TrafficError::PopulationTooSmall(n));
    }
    let preferred = sets.of(caller);
    if !preferred.is_empty() && rng.random::<f64>() < params.preferred_prob {
        return Ok(preferred[rng.random_range(0..preferred.len())]);
    }
    let i = rng.random_range(0..n as u32 - 1);
    Ok(if i >= caller { i + 1 } else { i })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CallRecord {
    pub time: f64,
    pub caller: u32,
    pub callee: u32,
}

pub fn write_calltrace<W: Write>(mut w: W, calls: &[CallRecord]) -> io::Result<()> {
    writeln!(w, "{CALLTRACE_HEADER}")?;
    for c in calls {
        writeln!(w, "{} {} {}", c.time, c.caller, c.callee)?;
    }
    Ok(())
}

pub fn read_calltrace(text: &str) -> Result<Vec<CallRecord>, TrafficError> {
    let err = |line: usize, msg: String| TrafficError::Trace { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == CALLTRACE_HEADER => {}
        Some((n, h)) => return Err(err(n, format!("unknown header `{h}`"))),
        None => return Err(err(1, "empty call trace".into())),
    }
    let mut out = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (n, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(n, "expected `t caller callee`".into()));
        }
        let rec = CallRecord {
            time: t[0].parse().map_err(|_| err(n, format!("bad time `{}`", t[0])))?,
            caller: t[1].parse().map_err(|_| err(n, format!("bad caller `{}`", t[1])))?,
            callee: t[2].parse().map_err(|_| err(n, format!("bad callee `{}`", t[2])))?,
        };
        if !rec.time.is_finite() || rec.time < last {
            return Err(err(n, "call times must be finite and non-decreasing".into()));
        }
        if rec.caller == rec.callee {
            return Err(err(n, "caller calls itself".into()));
        }
        last = rec.time;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_schedules_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(next_call_time(3.0, 0.0, &mut rng), None);
    }

    #[test]
    fn arrivals_are_strictly_later() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert!(next_call_time(5.0, 1000.0, &mut rng).unwrap() > 5.0);
        }
    }

    #[test]
    fn single_preferred_peer_with_certainty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sets = PreferredSets::assign(10, 1, &mut rng);
        let p = CallParams {
            preferred_size: 1,
            preferred_prob: 1.0,
            ..CallParams::default()
        };
        let peer = sets.of(3)[0];
        for _ in 0..1000 {
            assert_eq!(pick_callee(3, &sets, &p, &mut rng).unwrap(), peer);
        }
    }

    #[test]
    fn lone_user_cannot_call() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sets = PreferredSets::assign(1, 5, &mut rng);
        assert_eq!(
            pick_callee(0, &sets, &CallParams::default(), &mut rng),
            Err(TrafficError::PopulationTooSmall(1))
        );
    }

    #[test]
    fn sets_exclude_owner_and_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sets = PreferredSets::assign(20, 5, &mut rng);
        for u in 0..20u32 {
            let s = sets.of(u);
            assert_eq!(s.len(), 5);
            assert!(!s.contains(&u));
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        let small = PreferredSets::assign(3, 5, &mut rng);
        assert_eq!(small.of(1), &[0, 2]);
    }

    #[test]
    fn calltrace_round_trip() {
        let calls = vec![
            CallRecord { time: 0.5, caller: 1, callee: 2 },
            CallRecord { time: 1.75, caller: 2, callee: 0 },
        ];
        let mut buf = Vec::new();
        write_calltrace(&mut buf, &calls).unwrap();
        assert_eq!(read_calltrace(std::str::from_utf8(&buf).unwrap()).unwrap(), calls);
        assert!(read_calltrace("#calltrace v1\n1 2 2\n").is_err());
    }
}
