use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn locsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

const SCENARIO: &str = "\
[topology]
source = canonical

[traffic]
cmr = 2
preferred-size = 5
preferred-prob = 0.8

[scheme]
scheme = ws-hlr

[run]
seed = 7
users = 20
events = 3000
";

fn scenario(dir: &TempDir) -> PathBuf {
    write(dir, "canonical.ini", SCENARIO)
}

#[test]
fn validate_reports_every_check() {
    let dir = TempDir::new().unwrap();
    scenario(&dir);
    let o = locsim(dir.path(), &["validate", "canonical.ini"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().count() > 5);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn validate_flags_bad_topologies() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "lonely.topo",
        "root R\nroot S\nedge R x\nedge x a\nedge S b\nedge S c\n\
         zone a 0 0 0 0\nzone b 0 1 0 1\nzone c 0 2 0 2\n\
         move a b:0.5 c:0.3\nmove b a:1\nmove c a:1\n",
    );
    write(&dir, "bad.ini", "[topology]\nsource = lonely.topo\n[run]\nseed = 1\n");
    let o = locsim(dir.path(), &["validate", "bad.ini"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL min-children")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("FAIL probability-sums")), "{out}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    write(&dir, "noseed.ini", "[topology]\nsource = canonical\n");
    let o = locsim(dir.path(), &["simulate", "noseed.ini"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    scenario(&dir);
    assert_eq!(code(&locsim(dir.path(), &["simulate", "canonical.ini", "--scheme", "nope"])), 2);
    assert_eq!(code(&locsim(dir.path(), &["simulate", "missing.ini"])), 2);
    let o = locsim(
        dir.path(),
        &["generate-mobility", "--model", "gauss-markov", "--nodes", "3", "--seed", "1", "--gm-alpha", "1.3"],
    );
    assert_eq!(code(&o), 2);
    assert_eq!(code(&locsim(dir.path(), &["sweep", "canonical.ini", "--cmr", "0", "-o", "x.csv"])), 2);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    scenario(&dir);
    for (name, extra) in [("a.csv", None), ("b.csv", None), ("c.csv", Some("--check-invariants"))] {
        let mut args = vec!["simulate", "canonical.ini", "-o", name];
        args.extend(extra);
        let o = locsim(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    let text = String::from_utf8(read("a.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("ws-hlr,2,7,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn sweep_writes_paired_table_and_sidecars() {
    let dir = TempDir::new().unwrap();
    scenario(&dir);
    let o = locsim(
        dir.path(),
        &["sweep", "canonical.ini", "--cmr", "0.5,4", "--seeds", "1-3", "-o", "sweep.csv", "--plot-data", "plot.dat"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 3 * 4);
    let meta = fs::read_to_string(dir.path().join("sweep.csv.meta")).unwrap();
    assert!(meta.lines().any(|l| l == "paired true"), "{meta}");
    let plot = fs::read_to_string(dir.path().join("plot.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 2 * 4);

    let o = locsim(dir.path(), &["report", "sweep.csv"]);
    assert_eq!(code(&o), 0);
    let report = stdout(&o);
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("3")), "{report}");
    assert!(rows[0].contains('±'));
}

#[test]
fn single_cell_sweep_matches_simulate() {
    let dir = TempDir::new().unwrap();
    scenario(&dir);
    let o = locsim(
        dir.path(),
        &["sweep", "canonical.ini", "--cmr", "2", "--schemes", "ws-hlr", "--seeds", "7", "-o", "one.csv"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(code(&locsim(dir.path(), &["simulate", "canonical.ini", "-o", "sim.csv"])), 0);
    let swept = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let simulated = fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert_eq!(swept, simulated);
}

#[test]
fn generated_traces_are_seeded() {
    let dir = TempDir::new().unwrap();
    let gen = |seed: &str, out: &str| {
        let o = locsim(
            dir.path(),
            &["generate-mobility", "--model", "rpgm", "--nodes", "8", "--seed", seed, "--duration", "120", "-o", out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out)).unwrap()
    };
    let (a, b, c) = (gen("5", "a.trace"), gen("5", "b.trace"), gen("6", "c.trace"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("#mobtrace v1"));

    write(
        &dir,
        "replay.ini",
        "[topology]\nsource = canonical\n[mobility]\ntrace = a.trace\n[traffic]\ncmr = 1\n[run]\nseed = 2\nusers = 8\nduration = 120\n",
    );
    let o = locsim(dir.path(), &["simulate", "replay.ini", "--scheme", "hier", "--check-invariants"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("hier,1,2,"));
}
