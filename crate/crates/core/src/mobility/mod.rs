//! Synthetic mobility: seven entity models, five group models, zone-crossing
//! extraction and trace import/export.
//!
//! Every step function is pure given `(state, params, rng)`; callers that
//! want reproducible trajectories own the rng stream.

mod city;
mod entity;
mod field;
mod group;
mod trace;

pub use city::{plan_route, route_length, CityMemory, StreetGrid};
pub use entity::{
    init_entity, step_boundless, step_city_section, step_entity, step_gauss_markov,
    step_probabilistic_walk, step_random_direction, step_random_walk, step_random_waypoint,
    AxisState,
};
pub use field::{generate_trace, MobilityField};
pub use group::{init_group, step_group, GroupState};
pub use trace::{
    emit_zone_crossings, initial_zones, matrix_walk, read_trace, write_mobtrace, write_zone_events,
    ImportedTrace, TraceRecord, ZoneMove,
};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::topology::TopologyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error("{key} out of range: {detail}")]
    OutOfRange { key: &'static str, detail: String },
    #[error("unknown mobility model `{0}`")]
    UnknownModel(String),
    #[error("model {model} cannot be stepped as {expected}")]
    WrongModel { model: String, expected: &'static str },
    #[error("no street route from {from:?} to {to:?}")]
    Unreachable { from: (usize, usize), to: (usize, usize) },
    #[error("trace line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntityModel {
    RandomWalk,
    RandomWaypoint,
    RandomDirection,
    Boundless,
    GaussMarkov,
    ProbabilisticWalk,
    CitySection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupModel {
    Ecr,
    Column,
    Nomadic,
    Pursue,
    Rpgm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Entity(EntityModel),
    Group(GroupModel),
}

const MODEL_NAMES: &[(&str, ModelKind)] = &[
    ("random-walk", ModelKind::Entity(EntityModel::RandomWalk)),
    ("random-waypoint", ModelKind::Entity(EntityModel::RandomWaypoint)),
    ("random-direction", ModelKind::Entity(EntityModel::RandomDirection)),
    ("boundless", ModelKind::Entity(EntityModel::Boundless)),
    ("gauss-markov", ModelKind::Entity(EntityModel::GaussMarkov)),
    ("probabilistic-walk", ModelKind::Entity(EntityModel::ProbabilisticWalk)),
    ("city-section", ModelKind::Entity(EntityModel::CitySection)),
    ("ecr", ModelKind::Group(GroupModel::Ecr)),
    ("column", ModelKind::Group(GroupModel::Column)),
    ("nomadic", ModelKind::Group(GroupModel::Nomadic)),
    ("pursue", ModelKind::Group(GroupModel::Pursue)),
    ("rpgm", ModelKind::Group(GroupModel::Rpgm)),
];

impl ModelKind {
    pub fn all() -> impl Iterator<Item = ModelKind> {
        MODEL_NAMES.iter().map(|(_, k)| *k)
    }

    pub fn name(self) -> &'static str {
        MODEL_NAMES.iter().find(|(_, k)| *k == self).unwrap().0
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = MobilityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MODEL_NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, k)| *k)
            .ok_or_else(|| MobilityError::UnknownModel(s.to_string()))
    }
}

impl FromStr for GroupModel {
    type Err = MobilityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse()? {
            ModelKind::Group(g) => Ok(g),
            ModelKind::Entity(_) => Err(MobilityError::UnknownModel(s.to_string())),
        }
    }
}

/// How a random-walk leg ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkMode {
    Time,
    Distance,
}

/// Parameters shared by all models; each model reads only its own subset.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub width: f64,
    pub height: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub pause_time: f64,
    /// Sampling interval of every model, seconds.
    pub step_time: f64,
    pub walk_mode: WalkMode,
    /// Leg length of the random walk in seconds (time mode).
    pub walk_interval: f64,
    /// Leg length of the random walk in meters (distance mode).
    pub walk_distance: f64,
    pub gm_alpha: f64,
    pub gm_mean_speed: f64,
    pub gm_mean_direction: f64,
    pub gm_speed_std: f64,
    pub gm_direction_std: f64,
    /// Distance from a wall inside which the mean direction points at the center.
    pub gm_edge_margin: f64,
    pub max_accel: f64,
    pub max_angular_change: f64,
    /// Rows/columns ordered stay, previous (negative), next (positive).
    pub prob_matrix: [[f64; 3]; 3],
    pub prob_step: f64,
    pub street: Option<StreetGrid>,
    pub group_size: usize,
    pub group_radius: f64,
    pub advance: Point,
    pub column_spacing: f64,
    pub pursuit_gain: f64,
    pub pursuit_jitter: f64,
    pub rpgm_deviation_max: f64,
    pub ecr_tau: f64,
    pub ecr_sigma: f64,
}

pub const DEFAULT_PROB_MATRIX: [[f64; 3]; 3] = [[0.0, 0.5, 0.5], [0.3, 0.7, 0.0], [0.3, 0.0, 0.7]];

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            width: 2500.0,
            height: 2000.0,
            min_speed: 1.0,
            max_speed: 20.0,
            pause_time: 30.0,
            step_time: 1.0,
            walk_mode: WalkMode::Time,
            walk_interval: 60.0,
            walk_distance: 500.0,
            gm_alpha: 0.75,
            gm_mean_speed: 10.0,
            gm_mean_direction: 0.0,
            gm_speed_std: 2.0,
            gm_direction_std: 0.5,
            gm_edge_margin: 500.0,
            max_accel: 1.0,
            max_angular_change: PI / 8.0,
            prob_matrix: DEFAULT_PROB_MATRIX,
            prob_step: 10.0,
            street: None,
            group_size: 4,
            group_radius: 100.0,
            advance: Point::new(5.0, 0.0),
            column_spacing: 20.0,
            pursuit_gain: 0.5,
            pursuit_jitter: 5.0,
            rpgm_deviation_max: 50.0,
            ecr_tau: 10.0,
            ecr_sigma: 300.0,
        }
    }
}

fn range(key: &'static str, detail: String) -> MobilityError {
    MobilityError::OutOfRange { key, detail }
}

impl ModelParams {
    /// Street grid in use: the configured one or a default fitted to the area.
    pub fn streets(&self) -> StreetGrid {
        self.street
            .clone()
            .unwrap_or_else(|| StreetGrid::fitted(self.width, self.height, self.width.min(self.height) / 5.0, self.max_speed))
    }

    /// Checks ranges. Returns non-fatal warnings on success.
    pub fn validate(&self) -> Result<Vec<String>, MobilityError> {
        let mut warnings = Vec::new();
        let pos = |key, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(range(key, format!("{v} must be positive")))
            }
        };
        let nonneg = |key, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(range(key, format!("{v} must be non-negative")))
            }
        };
        pos("width", self.width)?;
        pos("height", self.height)?;
        pos("step-time", self.step_time)?;
        nonneg("min-speed", self.min_speed)?;
        pos("max-speed", self.max_speed)?;
        if self.min_speed > self.max_speed {
            return Err(range("min-speed", format!("{} exceeds max-speed {}", self.min_speed, self.max_speed)));
        }
        if self.min_speed == 0.0 {
            warnings.push("min-speed = 0 lets random-waypoint speeds decay toward zero".to_string());
        }
        nonneg("pause-time", self.pause_time)?;
        pos("walk-interval", self.walk_interval)?;
        pos("walk-distance", self.walk_distance)?;
        if !(0.0..=1.0).contains(&self.gm_alpha) {
            return Err(range("gm-alpha", format!("{} not in [0, 1]", self.gm_alpha)));
        }
        nonneg("gm-mean-speed", self.gm_mean_speed)?;
        nonneg("gm-speed-std", self.gm_speed_std)?;
        nonneg("gm-direction-std", self.gm_direction_std)?;
        nonneg("gm-edge-margin", self.gm_edge_margin)?;
        nonneg("max-accel", self.max_accel)?;
        nonneg("max-angular-change", self.max_angular_change)?;
        for row in &self.prob_matrix {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(range("prob-matrix", format!("row {row:?} is not a distribution")));
            }
        }
        pos("prob-step", self.prob_step)?;
        if self.group_size == 0 {
            return Err(range("group-size", "must be at least 1".into()));
        }
        nonneg("group-radius", self.group_radius)?;
        nonneg("column-spacing", self.column_spacing)?;
        if !(0.0..=1.0).contains(&self.pursuit_gain) {
            return Err(range("pursuit-gain", format!("{} not in [0, 1]", self.pursuit_gain)));
        }
        nonneg("pursuit-jitter", self.pursuit_jitter)?;
        nonneg("rpgm-deviation-max", self.rpgm_deviation_max)?;
        pos("ecr-tau", self.ecr_tau)?;
        nonneg("ecr-sigma", self.ecr_sigma)?;
        if !self.advance.x.is_finite() || !self.advance.y.is_finite() {
            return Err(range("advance", "must be finite".into()));
        }
        self.streets().validate(self.width, self.height)?;
        Ok(warnings)
    }
}

/// Model-specific memory carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub enum Memory {
    None,
    /// Random walk: time left on the current leg.
    Leg { remaining: f64 },
    /// Random waypoint: current destination and pause timer.
    Waypoint { target: Point, pause_left: f64 },
    /// Random direction: pause timer at the wall.
    Wall { pause_left: f64 },
    /// Probabilistic walk: per-axis chain state.
    Walker { x: AxisState, y: AxisState },
    City(CityMemory),
}

/// Kinematic state of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityState {
    pub pos: Point,
    pub speed: f64,
    /// Heading in radians, counter-clockwise from +x.
    pub direction: f64,
    pub memory: Memory,
}

impl MobilityState {
    pub fn at(pos: Point) -> Self {
        Self {
            pos,
            speed: 0.0,
            direction: 0.0,
            memory: Memory::None,
        }
    }
}

/// Keeps a point inside the half-open area `[0, width) x [0, height)`.
pub(crate) fn contain(p: Point, width: f64, height: f64) -> Point {
    Point::new(p.x.clamp(0.0, width.next_down()), p.y.clamp(0.0, height.next_down()))
}
