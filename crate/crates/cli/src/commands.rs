use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use locsim::engine::{
    lookup_cost_ratio, run, run_observed, sweep_cmr, write_csv, CsvRow, EngineError, Event, SweepRow,
};
use locsim::mobility::{emit_zone_crossings, generate_trace, write_mobtrace, write_zone_events, ModelKind, ModelParams};
use locsim::scenario::{set_model_param, Scenario, ScenarioFile, TrafficSpec};
use locsim::schemes::{LocationScheme, MessageLog, SchemeKind};
use locsim::topology::Topology;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::output::{csv_io, emit, write_atomic};
use crate::{Failure, GenerateArgs, SimulateArgs, SweepArgs, ValidateArgs};

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = read(path)?;
    let file = ScenarioFile::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(file.build(&base_dir(path)).map_err(|e| anyhow!("{}: {e}", path.display()))?)
}

fn engine_failure(e: EngineError) -> Failure {
    match e.event_index() {
        Some(_) => Failure::Consistency(e.into()),
        None => Failure::Usage(e.into()),
    }
}

fn load_topology(source: &str) -> anyhow::Result<Topology> {
    if source == "canonical" {
        return Ok(Topology::canonical());
    }
    Ok(Topology::parse(&read(Path::new(source))?)?)
}

pub fn generate_mobility(a: GenerateArgs) -> Result<(), Failure> {
    let seed = a.seed.ok_or_else(|| anyhow!("--seed is required"))?;
    let kind: ModelKind = a.model.parse()?;
    if !(a.duration >= 0.0 && a.duration.is_finite()) {
        return Err(anyhow!("duration out of range: {} must be non-negative", a.duration).into());
    }
    let topo = load_topology(&a.topology)?;
    let grid = topo.grid.as_ref();
    let mut p = ModelParams::default();
    if let Some(g) = grid {
        p.width = g.width();
        p.height = g.height();
    }
    let flags: [(&str, Option<String>); 8] = [
        ("width", a.width.map(|v| v.to_string())),
        ("height", a.height.map(|v| v.to_string())),
        ("min-speed", a.min_speed.map(|v| v.to_string())),
        ("max-speed", a.max_speed.map(|v| v.to_string())),
        ("pause-time", a.pause_time.map(|v| v.to_string())),
        ("step-time", a.step_time.map(|v| v.to_string())),
        ("gm-alpha", a.gm_alpha.map(|v| v.to_string())),
        ("group-size", a.group_size.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            set_model_param(&mut p, key, &v).map_err(|m| anyhow!("{key}: {m}"))?;
        }
    }
    for kv in &a.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--param expects key=value, got `{kv}`"))?;
        set_model_param(&mut p, k.trim(), v.trim()).map_err(|m| anyhow!("{}: {m}", k.trim()))?;
    }
    for w in p.validate()? {
        log::warn!("{w}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let records = generate_trace(kind, &p, a.nodes, a.duration, &mut rng)?;
    write_atomic(&a.out, |w| write_mobtrace(w, p.width, p.height, &records))?;
    let covered = grid.filter(|g| p.width <= g.width() && p.height <= g.height());
    let crossings = match covered {
        Some(g) => {
            let moves = emit_zone_crossings(&records, g)?;
            if let Some(path) = &a.zones {
                write_atomic(path, |w| write_zone_events(w, &topo.tree, &moves))?;
            }
            moves.len().to_string()
        }
        None if a.zones.is_some() => bail_usage("the movement area exceeds the topology grid")?,
        None => "n/a".to_string(),
    };
    println!(
        "nodes {} duration {} crossings {} model {} seed {}",
        a.nodes, a.duration, crossings, kind, seed
    );
    Ok(())
}

fn bail_usage<T>(msg: &str) -> Result<T, Failure> {
    Err(Failure::Usage(anyhow!("{msg}")))
}

fn scenario_cmr(sc: &Scenario) -> Option<f64> {
    match &sc.traffic {
        TrafficSpec::Poisson(p) => p.cmr,
        TrafficSpec::Trace(_) => None,
    }
}

pub fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut sc = load_scenario(&a.scenario)?;
    if let Some(s) = &a.scheme {
        sc.scheme = s.parse::<SchemeKind>()?;
    }
    let res = if a.check_invariants {
        let mut check = |_: u64, _: &Event, _: &MessageLog, s: &dyn LocationScheme| s.check_invariants().map_err(|e| e.to_string());
        run_observed(&sc, &mut check)
    } else {
        run(&sc)
    }
    .map_err(engine_failure)?;
    log::info!(
        "{}: {} moves, {} calls, fingerprint {}",
        sc.scheme,
        res.ledger.moves,
        res.ledger.calls,
        res.fingerprint
    );
    let row = CsvRow::new(sc.scheme, scenario_cmr(&sc), sc.seed, &res.ledger);
    let out = a.out.as_deref().or(sc.output.as_deref());
    emit(out, |w| write_csv(w, &[row]).map_err(csv_io))?;
    Ok(())
}

/// `1-10`, `3` or `1,4,9`.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((lo, hi)) = s.split_once('-') {
        let lo: u64 = lo.trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        let hi: u64 = hi.trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        if lo > hi {
            bail!("seed range `{s}` is empty");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Per `(seed, cmr)` cell: the shared event fingerprint, or `None` when the
/// schemes saw different streams.
fn pairing(rows: &[SweepRow]) -> BTreeMap<(u64, String), Option<String>> {
    let mut cells: BTreeMap<(u64, String), Option<String>> = BTreeMap::new();
    for r in rows {
        let key = (r.seed, r.cmr.to_string());
        let fp = &r.result.fingerprint;
        cells
            .entry(key)
            .and_modify(|c| {
                if c.as_deref() != Some(fp.as_str()) {
                    *c = None;
                }
            })
            .or_insert_with(|| Some(fp.clone()));
    }
    cells
}

fn write_meta(w: &mut dyn Write, scenario: &Path, schemes: &[SchemeKind], cells: &BTreeMap<(u64, String), Option<String>>) -> std::io::Result<()> {
    writeln!(w, "#sweep-meta v1")?;
    writeln!(w, "scenario {}", scenario.display())?;
    let names: Vec<&str> = schemes.iter().map(|s| s.name()).collect();
    writeln!(w, "schemes {}", names.join(","))?;
    writeln!(w, "paired {}", cells.values().all(Option::is_some))?;
    writeln!(w, "seed cmr fingerprint")?;
    for ((seed, cmr), fp) in cells {
        writeln!(w, "{seed} {cmr} {}", fp.as_deref().unwrap_or("MISMATCH"))?;
    }
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn write_plot(w: &mut dyn Write, rows: &[SweepRow], cmrs: &[f64], schemes: &[SchemeKind]) -> std::io::Result<()> {
    writeln!(w, "# cmr scheme runs hop_cost_mean hop_cost_std db_writes_mean mean_lookup_hops local_ratio")?;
    for &c in cmrs {
        for &k in schemes {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.cmr == c && r.scheme == k).collect();
            let hops: Vec<f64> = cell.iter().map(|r| r.result.ledger.hop_cost as f64).collect();
            let writes: Vec<f64> = cell.iter().map(|r| r.result.ledger.db_writes as f64).collect();
            let ratios: Vec<(f64, f64)> = cell.iter().filter_map(|r| lookup_cost_ratio(&r.result.ledger)).collect();
            let (hm, hs) = mean_std(&hops);
            let (wm, _) = mean_std(&writes);
            let (lm, lr) = if ratios.is_empty() {
                ("nan".to_string(), "nan".to_string())
            } else {
                let n = ratios.len() as f64;
                (
                    (ratios.iter().map(|r| r.0).sum::<f64>() / n).to_string(),
                    (ratios.iter().map(|r| r.1).sum::<f64>() / n).to_string(),
                )
            };
            writeln!(w, "{c} {} {} {hm} {hs} {wm} {lm} {lr}", k.name(), cell.len())?;
        }
    }
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let sc = load_scenario(&a.scenario)?;
    let schemes = a
        .schemes
        .iter()
        .map(|s| s.trim().parse::<SchemeKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let seeds = match &a.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![sc.seed],
    };
    let rows = sweep_cmr(&sc, &a.cmr, &schemes, &seeds).map_err(engine_failure)?;
    let cells = pairing(&rows);
    let csv_rows: Vec<CsvRow> = rows
        .iter()
        .map(|r| CsvRow::new(r.scheme, Some(r.cmr), r.seed, &r.result.ledger))
        .collect();
    write_atomic(&a.out, |w| write_csv(w, &csv_rows).map_err(csv_io))?;
    write_atomic(&meta_path(&a.out), |w| write_meta(w, &a.scenario, &schemes, &cells))?;
    if let Some(p) = &a.plot_data {
        write_atomic(p, |w| write_plot(w, &rows, &a.cmr, &schemes))?;
    }
    if cells.values().any(Option::is_none) {
        return Err(Failure::Consistency(anyhow!("schemes consumed different event streams")));
    }
    println!("{} runs written to {}", rows.len(), a.out.display());
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<(), Failure> {
    let text = read(&a.scenario)?;
    let checks = match ScenarioFile::parse(&text) {
        Ok(f) => f.validate(&base_dir(&a.scenario)),
        Err(e) => {
            println!("FAIL parse: {e}");
            return Err(Failure::Checks);
        }
    };
    println!("PASS parse");
    let mut failed = false;
    for c in &checks {
        match &c.outcome {
            Ok(()) => println!("PASS {}", c.name),
            Err(m) => {
                failed = true;
                println!("FAIL {}: {m}", c.name);
            }
        }
    }
    if failed {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_errors_map_to_exit_classes() {
        let check = EngineError::Check { index: 5, msg: "stale".into() };
        assert_eq!(engine_failure(check).code(), 3);
        assert_eq!(engine_failure(EngineError::Config("no schemes".into())).code(), 2);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1-3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn meta_sidecar_name() {
        assert_eq!(meta_path(Path::new("out/s.csv")), PathBuf::from("out/s.csv.meta"));
    }
}
