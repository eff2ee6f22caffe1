use rayon::prelude::*;

use super::{run, EngineError, RunResult};
use crate::scenario::{Scenario, TrafficSpec};
use crate::schemes::SchemeKind;

pub const THREADS_ENV: &str = "LOCSIM_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub cmr: f64,
    pub seed: u64,
    pub result: RunResult,
}

/// Worker cap from `LOCSIM_THREADS`; `None` when unset or unparsable.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// One run per `(seed, cmr, scheme)`, rows in that nesting order. Runs at
/// equal seed and cmr see the same event stream.
pub fn sweep_cmr(base: &Scenario, cmrs: &[f64], schemes: &[SchemeKind], seeds: &[u64]) -> Result<Vec<SweepRow>, EngineError> {
    if cmrs.is_empty() || cmrs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(EngineError::Config("cmr values must be positive and non-empty".into()));
    }
    if schemes.is_empty() {
        return Err(EngineError::Config("no schemes to sweep".into()));
    }
    let TrafficSpec::Poisson(params) = &base.traffic else {
        return Err(EngineError::Config("a cmr sweep needs poisson traffic".into()));
    };
    let mut jobs = Vec::new();
    for &seed in seeds {
        for &cmr in cmrs {
            for &scheme in schemes {
                let mut sc = base.clone();
                sc.seed = seed;
                sc.scheme = scheme;
                let mut p = params.clone();
                p.cmr = Some(cmr);
                sc.traffic = TrafficSpec::Poisson(p);
                jobs.push((scheme, cmr, seed, sc));
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|(scheme, cmr, seed, sc)| {
                run(sc).map(|result| SweepRow {
                    scheme: *scheme,
                    cmr: *cmr,
                    seed: *seed,
                    result,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EngineError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Horizon;

    #[test]
    fn single_cell_matches_run() {
        let mut sc = Scenario::canonical(4);
        sc.horizon = Horizon::Events(2000);
        let rows = sweep_cmr(&sc, &[2.0], &[SchemeKind::WsHlr], &[4]).unwrap();
        assert_eq!(rows.len(), 1);
        let mut one = sc.clone();
        one.scheme = SchemeKind::WsHlr;
        if let TrafficSpec::Poisson(p) = &mut one.traffic {
            p.cmr = Some(2.0);
        }
        assert_eq!(rows[0].result, run(&one).unwrap());
    }

    #[test]
    fn paired_streams() {
        let mut sc = Scenario::canonical(5);
        sc.horizon = Horizon::Events(1000);
        let rows = sweep_cmr(&sc, &[0.5, 4.0], &SchemeKind::ALL, &[5]).unwrap();
        assert_eq!(rows.len(), 8);
        for cell in rows.chunks(4) {
            assert!(cell.iter().all(|r| r.result.fingerprint == cell[0].result.fingerprint));
        }
        assert_ne!(rows[0].result.fingerprint, rows[4].result.fingerprint);
    }

    #[test]
    fn rejects_bad_cmr() {
        let sc = Scenario::canonical(1);
        assert!(sweep_cmr(&sc, &[], &[SchemeKind::Hlr], &[1]).is_err());
        assert!(sweep_cmr(&sc, &[0.0], &[SchemeKind::Hlr], &[1]).is_err());
    }
}
