use std::io;

use serde::Serialize;

use crate::schemes::{MessageKind, MessageLog, SchemeKind};

/// Per-run accumulators.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricsLedger {
    pub db_reads: u64,
    pub db_writes: u64,
    pub messages_update: u64,
    pub messages_dereg: u64,
    pub messages_lookup: u64,
    pub messages_delivery: u64,
    pub messages_replica: u64,
    pub messages_invalidate: u64,
    pub hop_cost: u64,
    pub lookups_total: u64,
    pub lookups_local: u64,
    /// Sum of per-call lookup cost.
    pub lookup_cost: u64,
    pub moves: u64,
    pub calls: u64,
}

impl MetricsLedger {
    pub fn absorb(&mut self, log: &MessageLog) {
        for m in &log.messages {
            self.db_reads += m.reads as u64;
            self.db_writes += m.writes as u64;
            self.hop_cost += m.hops;
            self.lookup_cost += m.lookup_cost;
            *match m.kind {
                MessageKind::Update => &mut self.messages_update,
                MessageKind::Deregister => &mut self.messages_dereg,
                MessageKind::Lookup => &mut self.messages_lookup,
                MessageKind::CallDelivery => &mut self.messages_delivery,
                MessageKind::ReplicaUpdate => &mut self.messages_replica,
                MessageKind::Invalidate => &mut self.messages_invalidate,
            } += 1;
        }
        if let Some(l) = log.lookup {
            self.lookups_total += 1;
            self.lookups_local += l.local as u64;
        }
    }

    pub fn total_messages(&self) -> u64 {
        self.messages_update
            + self.messages_dereg
            + self.messages_lookup
            + self.messages_delivery
            + self.messages_replica
            + self.messages_invalidate
    }

    /// Calls per move actually realised.
    pub fn realized_cmr(&self) -> Option<f64> {
        (self.moves > 0).then(|| self.calls as f64 / self.moves as f64)
    }
}

/// `(mean lookup cost per call, local lookups / all lookups)`, absent when
/// there were no calls.
pub fn lookup_cost_ratio(l: &MetricsLedger) -> Option<(f64, f64)> {
    (l.lookups_total > 0).then(|| {
        (
            l.lookup_cost as f64 / l.lookups_total as f64,
            l.lookups_local as f64 / l.lookups_total as f64,
        )
    })
}

/// One line of a run or sweep table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub scheme: String,
    pub cmr: String,
    pub seed: u64,
    pub db_reads: u64,
    pub db_writes: u64,
    pub messages_update: u64,
    pub messages_dereg: u64,
    pub messages_lookup: u64,
    pub messages_replica: u64,
    pub messages_invalidate: u64,
    pub hop_cost: u64,
    pub lookups_total: u64,
    pub lookups_local: u64,
    pub mean_lookup_hops: String,
    pub local_ratio: String,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "scheme",
    "cmr",
    "seed",
    "db_reads",
    "db_writes",
    "messages_update",
    "messages_dereg",
    "messages_lookup",
    "messages_replica",
    "messages_invalidate",
    "hop_cost",
    "lookups_total",
    "lookups_local",
    "mean_lookup_hops",
    "local_ratio",
];

impl CsvRow {
    /// Call deliveries are part of the lookup traffic in the table.
    pub fn new(scheme: SchemeKind, cmr: Option<f64>, seed: u64, l: &MetricsLedger) -> Self {
        let ratio = lookup_cost_ratio(l);
        Self {
            scheme: scheme.name().to_string(),
            cmr: cmr.map(|c| c.to_string()).unwrap_or_default(),
            seed,
            db_reads: l.db_reads,
            db_writes: l.db_writes,
            messages_update: l.messages_update,
            messages_dereg: l.messages_dereg,
            messages_lookup: l.messages_lookup + l.messages_delivery,
            messages_replica: l.messages_replica,
            messages_invalidate: l.messages_invalidate,
            hop_cost: l.hop_cost,
            lookups_total: l.lookups_total,
            lookups_local: l.lookups_local,
            mean_lookup_hops: ratio.map(|r| r.0.to_string()).unwrap_or_default(),
            local_ratio: ratio.map(|r| r.1.to_string()).unwrap_or_default(),
        }
    }
}

pub fn write_csv<W: io::Write>(w: W, rows: &[CsvRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
