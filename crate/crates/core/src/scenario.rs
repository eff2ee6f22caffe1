//! Scenario files: `[section]` headers over `key = value` lines.
//!
//! ```text
//! [topology]
//! source = canonical        # or a topology file path
//! [mobility]
//! model = matrix-walk       # or any mobility model name
//! move-rate = 0.01
//! [traffic]
//! cmr = 2
//! [scheme]
//! scheme = ws-hlr
//! ws.ewma_alpha = 0.2
//! [run]
//! seed = 1
//! users = 20
//! events = 100000
//! ```
//!
//! Relative paths resolve against the scenario file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::mobility::{read_trace, ImportedTrace, ModelKind, ModelParams, Point, WalkMode};
use crate::schemes::{SchemeKind, UCostMode, WsConfig};
use crate::topology::{to_text, Topology, TopologyError, TopologySpec};
use crate::traffic::{read_calltrace, CallParams, CallRecord};

pub const DEFAULT_EVENTS: u64 = 100_000;
pub const DEFAULT_USERS: usize = 20;
pub const DEFAULT_MOVE_RATE: f64 = 0.01;
pub const DEFAULT_CALIBRATION_TIME: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        write!(f, "{}: {}", self.key, self.msg)
    }
}

fn err(line: Option<usize>, key: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Number of move and call events.
    Events(u64),
    /// Simulated seconds.
    Time(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MobilitySpec {
    /// Exponential holding times, next zone from the grid's crossing matrix.
    MatrixWalk { move_rate: f64 },
    Model {
        kind: ModelKind,
        params: ModelParams,
        /// Length of the pass that measures the move rate.
        calibration_time: f64,
    },
    Trace(Arc<ImportedTrace>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrafficSpec {
    Poisson(CallParams),
    Trace(Arc<Vec<CallRecord>>),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub topology: Arc<Topology>,
    pub mobility: MobilitySpec,
    pub traffic: TrafficSpec,
    pub scheme: SchemeKind,
    pub ws: WsConfig,
    pub users: usize,
    pub horizon: Horizon,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Scenario {
    /// Canonical fixture, matrix walk, 20 users, default skew, hlr.
    pub fn canonical(seed: u64) -> Self {
        Self {
            topology: Arc::new(Topology::canonical()),
            mobility: MobilitySpec::MatrixWalk {
                move_rate: DEFAULT_MOVE_RATE,
            },
            traffic: TrafficSpec::Poisson(CallParams::default()),
            scheme: SchemeKind::Hlr,
            ws: WsConfig::default(),
            users: DEFAULT_USERS,
            horizon: Horizon::Events(DEFAULT_EVENTS),
            seed,
            output: None,
        }
    }

    /// Canonical fixture driven by random waypoint over the grid area.
    pub fn canonical_waypoint(seed: u64) -> Self {
        let topo = Topology::canonical();
        let grid = topo.grid.as_ref().expect("canonical fixture has a grid");
        let params = ModelParams {
            width: grid.width(),
            height: grid.height(),
            ..ModelParams::default()
        };
        Self {
            mobility: MobilitySpec::Model {
                kind: "random-waypoint".parse().expect("known model"),
                params,
                calibration_time: DEFAULT_CALIBRATION_TIME,
            },
            topology: Arc::new(topo),
            ..Self::canonical(seed)
        }
    }

    pub fn with_cmr(mut self, cmr: f64) -> Self {
        if let TrafficSpec::Poisson(p) = &mut self.traffic {
            p.cmr = Some(cmr);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

const SECTIONS: [&str; 5] = ["topology", "mobility", "traffic", "scheme", "run"];

/// Raw sectioned key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioFile {
    pub sections: BTreeMap<String, Vec<Entry>>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut out = ScenarioFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(Some(line), name, "unknown section"));
                }
                if out.sections.contains_key(name) {
                    return Err(err(Some(line), name, "section repeated"));
                }
                out.sections.insert(name.to_string(), Vec::new());
                current = Some(name.to_string());
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(err(Some(line), body, "expected `key = value`"));
            };
            let Some(sec) = &current else {
                return Err(err(Some(line), k.trim(), "key outside any section"));
            };
            let entries = out.sections.get_mut(sec).expect("section inserted");
            let key = k.trim().to_string();
            if entries.iter().any(|e| e.key == key) {
                return Err(err(Some(line), &key, "key repeated"));
            }
            entries.push(Entry {
                key,
                value: v.trim().to_string(),
                line,
            });
        }
        Ok(out)
    }

    fn section(&self, name: &str) -> &[Entry] {
        self.sections.get(name).map_or(&[], |v| v.as_slice())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section).iter().find(|e| e.key == key)
    }

    fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<(), ScenarioError> {
        for e in self.section(section) {
            if !allowed.contains(&e.key.as_str()) {
                return Err(err(Some(e.line), &e.key, format!("unknown key in [{section}]")));
            }
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ScenarioError> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .parse()
                    .map_err(|_| err(Some(e.line), key, format!("cannot parse `{}`", e.value)))
            })
            .transpose()
    }

    /// Resolves every section into a runnable scenario. Files named in the
    /// scenario are read relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Scenario, ScenarioError> {
        let seed = self
            .num::<u64>("run", "seed")?
            .ok_or_else(|| err(None, "seed", "missing; every scenario needs an explicit seed"))?;
        let topology = Arc::new(self.topology(base)?);
        let mobility = self.mobility(base, &topology)?;
        let traffic = self.traffic(base)?;
        let (scheme, ws) = self.scheme()?;
        self.check_keys("run", &["seed", "users", "events", "duration", "output"])?;
        let users = match (&mobility, self.num::<usize>("run", "users")?) {
            (_, Some(u)) => u,
            (MobilitySpec::Trace(t), None) => trace_population(t),
            _ => DEFAULT_USERS,
        };
        let horizon = match (self.num::<u64>("run", "events")?, self.num::<f64>("run", "duration")?) {
            (Some(_), Some(_)) => return Err(err(None, "duration", "set either events or duration, not both")),
            (Some(n), None) => Horizon::Events(n),
            (None, Some(t)) if t >= 0.0 && t.is_finite() => Horizon::Time(t),
            (None, Some(t)) => return Err(err(None, "duration", format!("{t} must be non-negative"))),
            (None, None) => Horizon::Events(DEFAULT_EVENTS),
        };
        let output = self.get("run", "output").map(|e| base.join(&e.value));
        Ok(Scenario {
            topology,
            mobility,
            traffic,
            scheme,
            ws,
            users,
            horizon,
            seed,
            output,
        })
    }

    fn topology_text(&self, base: &Path) -> Result<String, ScenarioError> {
        self.check_keys("topology", &["source"])?;
        match self.get("topology", "source") {
            None => Ok(to_text(&Topology::canonical())),
            Some(e) if e.value == "canonical" => Ok(to_text(&Topology::canonical())),
            Some(e) => std::fs::read_to_string(base.join(&e.value))
                .map_err(|io| err(Some(e.line), "source", format!("{}: {io}", e.value))),
        }
    }

    fn topology(&self, base: &Path) -> Result<Topology, ScenarioError> {
        let text = self.topology_text(base)?;
        Topology::parse(&text).map_err(|e| err(None, "topology", e.to_string()))
    }

    fn mobility(&self, base: &Path, topo: &Topology) -> Result<MobilitySpec, ScenarioError> {
        let model = self.get("mobility", "model");
        let trace = self.get("mobility", "trace");
        match (model, trace) {
            (Some(_), Some(t)) => Err(err(Some(t.line), "trace", "set either model or trace, not both")),
            (None, Some(t)) => {
                self.check_keys("mobility", &["trace"])?;
                let text = std::fs::read_to_string(base.join(&t.value))
                    .map_err(|io| err(Some(t.line), "trace", format!("{}: {io}", t.value)))?;
                let tr = read_trace(&text, &topo.tree).map_err(|e| err(Some(t.line), "trace", e.to_string()))?;
                Ok(MobilitySpec::Trace(Arc::new(tr)))
            }
            (m, None) if m.is_none_or(|m| m.value == "matrix-walk") => {
                self.check_keys("mobility", &["model", "move-rate"])?;
                let move_rate = self.num::<f64>("mobility", "move-rate")?.unwrap_or(DEFAULT_MOVE_RATE);
                if !(move_rate >= 0.0 && move_rate.is_finite()) {
                    return Err(err(None, "move-rate", format!("{move_rate} must be non-negative")));
                }
                topo.grid().map_err(|e| err(None, "topology", e.to_string()))?;
                Ok(MobilitySpec::MatrixWalk { move_rate })
            }
            (Some(m), None) => {
                let kind: ModelKind = m.value.parse().map_err(|e: crate::mobility::MobilityError| err(Some(m.line), "model", e.to_string()))?;
                let grid = topo.grid().map_err(|e| err(None, "topology", e.to_string()))?;
                let mut params = ModelParams {
                    width: grid.width(),
                    height: grid.height(),
                    ..ModelParams::default()
                };
                let mut calibration_time = DEFAULT_CALIBRATION_TIME;
                for e in self.section("mobility") {
                    match e.key.as_str() {
                        "model" => {}
                        "calibration-time" => {
                            calibration_time = e
                                .value
                                .parse()
                                .map_err(|_| err(Some(e.line), &e.key, format!("cannot parse `{}`", e.value)))?;
                        }
                        k => set_model_param(&mut params, k, &e.value).map_err(|msg| err(Some(e.line), k, msg))?,
                    }
                }
                if params.width > grid.width() || params.height > grid.height() {
                    return Err(err(None, "width", "movement area exceeds the zone grid"));
                }
                params.validate().map_err(|e| err(None, "mobility", e.to_string()))?;
                Ok(MobilitySpec::Model {
                    kind,
                    params,
                    calibration_time,
                })
            }
            _ => unreachable!("all mobility combinations covered"),
        }
    }

    fn traffic(&self, base: &Path) -> Result<TrafficSpec, ScenarioError> {
        if let Some(t) = self.get("traffic", "trace") {
            self.check_keys("traffic", &["trace"])?;
            let text = std::fs::read_to_string(base.join(&t.value))
                .map_err(|io| err(Some(t.line), "trace", format!("{}: {io}", t.value)))?;
            let calls = read_calltrace(&text).map_err(|e| err(Some(t.line), "trace", e.to_string()))?;
            return Ok(TrafficSpec::Trace(Arc::new(calls)));
        }
        self.check_keys("traffic", &["call-rate", "cmr", "preferred-size", "preferred-prob"])?;
        let d = CallParams::default();
        let p = CallParams {
            call_rate: self.num("traffic", "call-rate")?.unwrap_or(d.call_rate),
            preferred_size: self.num("traffic", "preferred-size")?.unwrap_or(d.preferred_size),
            preferred_prob: self.num("traffic", "preferred-prob")?.unwrap_or(d.preferred_prob),
            cmr: self.num("traffic", "cmr")?,
        };
        p.validate().map_err(|e| err(None, "traffic", e.to_string()))?;
        Ok(TrafficSpec::Poisson(p))
    }

    fn scheme(&self) -> Result<(SchemeKind, WsConfig), ScenarioError> {
        self.check_keys(
            "scheme",
            &["scheme", "ws.ewma_alpha", "ws.u_cost_mode", "ws.strict_boundary", "ws.disabled"],
        )?;
        let kind = match self.get("scheme", "scheme") {
            None => SchemeKind::Hlr,
            Some(e) => e.value.parse().map_err(|x: crate::schemes::SchemeError| err(Some(e.line), "scheme", x.to_string()))?,
        };
        let mut ws = WsConfig::default();
        if let Some(a) = self.num::<f64>("scheme", "ws.ewma_alpha")? {
            if !(a > 0.0 && a <= 1.0) {
                return Err(err(None, "ws.ewma_alpha", format!("{a} not in (0, 1]")));
            }
            ws.ewma_alpha = Some(a);
        }
        if let Some(e) = self.get("scheme", "ws.u_cost_mode") {
            ws.u_cost_mode = match e.value.as_str() {
                "symmetric" => UCostMode::Symmetric,
                "announce_only" => UCostMode::AnnounceOnly,
                v => return Err(err(Some(e.line), "ws.u_cost_mode", format!("`{v}` is not symmetric or announce_only"))),
            };
        }
        if let Some(b) = self.num::<bool>("scheme", "ws.strict_boundary")? {
            ws.strict_boundary = b;
        }
        if let Some(b) = self.num::<bool>("scheme", "ws.disabled")? {
            ws.disabled = b;
        }
        Ok((kind, ws))
    }

    /// Named pass/fail checks over the whole file; never stops early.
    pub fn validate(&self, base: &Path) -> Vec<Check> {
        let mut checks = Vec::new();
        let mut push = |name: &str, r: Result<(), String>| checks.push(Check { name: name.to_string(), outcome: r });
        push(
            "seed",
            match self.num::<u64>("run", "seed") {
                Ok(Some(_)) => Ok(()),
                Ok(None) => Err("seed missing".into()),
                Err(e) => Err(e.to_string()),
            },
        );
        match self.topology_text(base) {
            Err(e) => push("topology", Err(e.to_string())),
            Ok(text) => match TopologySpec::parse(&text) {
                Err(e) => push("topology", Err(e.to_string())),
                Ok(spec) => {
                    push("topology", Ok(()));
                    let issues = spec.diagnose();
                    let pick = |f: fn(&TopologyError) -> bool| {
                        let bad: Vec<String> = issues.iter().filter(|e| f(e)).map(|e| e.to_string()).collect();
                        if bad.is_empty() {
                            Ok(())
                        } else {
                            Err(bad.join("; "))
                        }
                    };
                    push("connectivity", pick(|e| !matches!(e, TopologyError::MinChildren(_) | TopologyError::ProbabilitySum { .. } | TopologyError::BadGrid(_) | TopologyError::NotALeaf(_) | TopologyError::ZoneWithoutCells(_))));
                    push("min-children", pick(|e| matches!(e, TopologyError::MinChildren(_))));
                    push("zone-grid", pick(|e| matches!(e, TopologyError::BadGrid(_) | TopologyError::NotALeaf(_) | TopologyError::ZoneWithoutCells(_))));
                    push("probability-sums", pick(|e| matches!(e, TopologyError::ProbabilitySum { .. })));
                }
            },
        }
        let topo = self.topology(base);
        push(
            "mobility",
            match &topo {
                Ok(t) => self.mobility(base, t).map(|_| ()).map_err(|e| e.to_string()),
                Err(_) => Err("needs a valid topology".into()),
            },
        );
        push("traffic", self.traffic(base).map(|_| ()).map_err(|e| e.to_string()));
        push("scheme", self.scheme().map(|_| ()).map_err(|e| e.to_string()));
        push(
            "run",
            if topo.is_ok() {
                self.build(base).map(|_| ()).map_err(|e| e.to_string())
            } else {
                Err("needs a valid topology".into())
            },
        );
        checks
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub outcome: Result<(), String>,
}

fn trace_population(t: &ImportedTrace) -> usize {
    let max = match t {
        ImportedTrace::Positions { records, .. } => records.iter().map(|r| r.node).max(),
        ImportedTrace::ZoneEvents(moves) => moves.iter().map(|m| m.node).max(),
    };
    max.map_or(0, |m| m as usize + 1)
}

fn floats(v: &str, n: usize) -> Result<Vec<f64>, String> {
    let xs: Vec<f64> = v
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("cannot parse `{s}`")))
        .collect::<Result<_, _>>()?;
    if xs.len() != n {
        return Err(format!("expected {n} comma-separated numbers"));
    }
    Ok(xs)
}

/// Sets one model parameter by its kebab-case key. Ranges are checked by
/// [`ModelParams::validate`].
pub fn set_model_param(p: &mut ModelParams, key: &str, value: &str) -> Result<(), String> {
    let f = || value.parse::<f64>().map_err(|_| format!("cannot parse `{value}`"));
    match key {
        "width" => p.width = f()?,
        "height" => p.height = f()?,
        "min-speed" => p.min_speed = f()?,
        "max-speed" => p.max_speed = f()?,
        "pause-time" => p.pause_time = f()?,
        "step-time" => p.step_time = f()?,
        "walk-mode" => {
            p.walk_mode = match value {
                "time" => WalkMode::Time,
                "distance" => WalkMode::Distance,
                _ => return Err(format!("`{value}` is not time or distance")),
            }
        }
        "walk-interval" => p.walk_interval = f()?,
        "walk-distance" => p.walk_distance = f()?,
        "gm-alpha" => p.gm_alpha = f()?,
        "gm-mean-speed" => p.gm_mean_speed = f()?,
        "gm-mean-direction" => p.gm_mean_direction = f()?,
        "gm-speed-std" => p.gm_speed_std = f()?,
        "gm-direction-std" => p.gm_direction_std = f()?,
        "gm-edge-margin" => p.gm_edge_margin = f()?,
        "max-accel" => p.max_accel = f()?,
        "max-angular-change" => p.max_angular_change = f()?,
        "prob-matrix" => {
            let xs = floats(value, 9)?;
            for (i, row) in p.prob_matrix.iter_mut().enumerate() {
                row.copy_from_slice(&xs[3 * i..3 * i + 3]);
            }
        }
        "prob-step" => p.prob_step = f()?,
        "group-size" => p.group_size = value.parse().map_err(|_| format!("cannot parse `{value}`"))?,
        "group-radius" => p.group_radius = f()?,
        "advance" => {
            let xs = floats(value, 2)?;
            p.advance = Point::new(xs[0], xs[1]);
        }
        "column-spacing" => p.column_spacing = f()?,
        "pursuit-gain" => p.pursuit_gain = f()?,
        "pursuit-jitter" => p.pursuit_jitter = f()?,
        "rpgm-deviation-max" => p.rpgm_deviation_max = f()?,
        "ecr-tau" => p.ecr_tau = f()?,
        "ecr-sigma" => p.ecr_sigma = f()?,
        _ => return Err("unknown mobility parameter".into()),
    }
    Ok(())
}
