//! Discrete-event loop merging mobility and call streams and feeding them to
//! a location scheme.

mod metrics;
mod source;
mod sweep;

pub use metrics::{lookup_cost_ratio, write_csv, CsvRow, MetricsLedger, CSV_COLUMNS};
pub use source::{Event, EventSource, Payload};
pub use sweep::{sweep_cmr, thread_cap, SweepRow};

use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mobility::MobilityError;
use crate::scenario::Scenario;
use crate::schemes::{LocationScheme, MessageLog, SchemeError};
use crate::topology::TopologyError;
use crate::traffic::TrafficError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event {index}: {source}")]
    Scheme {
        index: u64,
        #[source]
        source: SchemeError,
    },
    #[error("event {index}: consistency check failed: {msg}")]
    Check { index: u64, msg: String },
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("initial registration: {0}")]
    Setup(SchemeError),
    #[error("{0}")]
    Config(String),
}

impl EngineError {
    /// Index of the event at which the run aborted, if it got that far.
    pub fn event_index(&self) -> Option<u64> {
        match self {
            EngineError::Scheme { index, .. } | EngineError::Check { index, .. } => Some(*index),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub ledger: MetricsLedger,
    /// SHA-256 over the processed event stream, hex encoded.
    pub fingerprint: String,
    /// Per-user move rate used to derive the call rate.
    pub move_rate: f64,
    pub call_rate: f64,
    pub end_time: f64,
}

/// Called after every processed event with its index, the event, the
/// scheme's reply and the scheme itself.
pub trait Observer {
    fn observe(&mut self, index: u64, event: &Event, log: &MessageLog, scheme: &dyn LocationScheme) -> Result<(), String>;
}

impl<F> Observer for F
where
    F: FnMut(u64, &Event, &MessageLog, &dyn LocationScheme) -> Result<(), String>,
{
    fn observe(&mut self, index: u64, event: &Event, log: &MessageLog, scheme: &dyn LocationScheme) -> Result<(), String> {
        self(index, event, log, scheme)
    }
}

struct Quiet;

impl Observer for Quiet {
    fn observe(&mut self, _: u64, _: &Event, _: &MessageLog, _: &dyn LocationScheme) -> Result<(), String> {
        Ok(())
    }
}

pub fn run(sc: &Scenario) -> Result<RunResult, EngineError> {
    run_observed(sc, &mut Quiet)
}

pub fn run_observed(sc: &Scenario, obs: &mut dyn Observer) -> Result<RunResult, EngineError> {
    let tree = Arc::new(sc.topology.tree.clone());
    let mut scheme = sc.scheme.build(tree, &sc.ws);
    let mut src = EventSource::new(sc)?;
    for (user, zone) in src.initial_zones().iter().copied().enumerate() {
        scheme.register(user as u32, zone, 0.0).map_err(EngineError::Setup)?;
    }
    let mut ledger = MetricsLedger::default();
    let mut hash = Sha256::new();
    let mut index = 0u64;
    let mut end_time = 0.0;
    while let Some(ev) = src.next_event()? {
        ev.digest(&mut hash);
        let log = match ev.payload {
            Payload::Move { user, from, to } => {
                ledger.moves += 1;
                scheme.on_move(user, from, to, ev.time)
            }
            Payload::Call { caller_zone, callee, .. } => {
                ledger.calls += 1;
                scheme.on_call(caller_zone, callee, ev.time)
            }
        }
        .map_err(|source| EngineError::Scheme { index, source })?;
        ledger.absorb(&log);
        obs.observe(index, &ev, &log, &*scheme)
            .map_err(|msg| EngineError::Check { index, msg })?;
        end_time = ev.time;
        index += 1;
    }
    let digest = hash.finalize();
    Ok(RunResult {
        ledger,
        fingerprint: digest.iter().map(|b| format!("{b:02x}")).collect(),
        move_rate: src.move_rate(),
        call_rate: src.call_rate(),
        end_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Horizon, Scenario};
    use crate::schemes::SchemeKind;

    fn small(scheme: SchemeKind, events: u64) -> Scenario {
        let mut sc = Scenario::canonical(7);
        sc.scheme = scheme;
        sc.horizon = Horizon::Events(events);
        sc
    }

    #[test]
    fn zero_horizon_is_empty() {
        let r = run(&small(SchemeKind::Hlr, 0)).unwrap();
        assert_eq!(r.ledger, MetricsLedger::default());
        let mut sc = small(SchemeKind::Hier, 10);
        sc.horizon = Horizon::Time(0.0);
        assert_eq!(run(&sc).unwrap().ledger, MetricsLedger::default());
    }

    #[test]
    fn replay_is_identical() {
        let sc = small(SchemeKind::WsHier, 3000);
        assert_eq!(run(&sc).unwrap(), run(&sc).unwrap());
    }

    #[test]
    fn schemes_share_the_event_stream() {
        let prints: Vec<String> = SchemeKind::ALL
            .iter()
            .map(|&k| run(&small(k, 2000)).unwrap().fingerprint)
            .collect();
        assert!(prints.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn no_calls_means_move_traffic_only() {
        let mut sc = small(SchemeKind::Hlr, 500);
        sc.users = 1;
        if let crate::scenario::TrafficSpec::Poisson(p) = &mut sc.traffic {
            p.cmr = None;
            p.call_rate = 0.0;
        }
        let r = run(&sc).unwrap();
        assert_eq!(r.ledger.calls, 0);
        assert_eq!(r.ledger.lookups_total, 0);
        assert_eq!(r.ledger.moves, 500);
        assert!(r.ledger.db_writes > 0 && r.ledger.db_reads == 0);
    }

    #[test]
    fn observer_abort_reports_index() {
        let sc = small(SchemeKind::Hlr, 100);
        let mut obs = |i: u64, _: &Event, _: &MessageLog, _: &dyn LocationScheme| if i == 42 { Err("stop".to_string()) } else { Ok(()) };
        let err = run_observed(&sc, &mut obs).unwrap_err();
        assert_eq!(err.event_index(), Some(42));
    }
}
