use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::city::{self, CityMemory};
use super::{contain, EntityModel, Memory, MobilityError, MobilityState, ModelParams, Point, WalkMode};

/// State of one axis of the probabilistic walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisState {
    Stay = 0,
    Prev = 1,
    Next = 2,
}

impl AxisState {
    pub const ALL: [AxisState; 3] = [AxisState::Stay, AxisState::Prev, AxisState::Next];

    fn offset(self) -> f64 {
        match self {
            AxisState::Stay => 0.0,
            AxisState::Prev => -1.0,
            AxisState::Next => 1.0,
        }
    }
}

fn uniform_speed<R: Rng + ?Sized>(p: &ModelParams, rng: &mut R) -> f64 {
    if p.max_speed > p.min_speed {
        rng.random_range(p.min_speed..=p.max_speed)
    } else {
        p.min_speed
    }
}

pub(super) fn uniform_point<R: Rng + ?Sized>(p: &ModelParams, rng: &mut R) -> Point {
    Point::new(rng.random_range(0.0..p.width), rng.random_range(0.0..p.height))
}

fn heading(d: f64) -> Point {
    Point::new(d.cos(), d.sin())
}

/// Mirrors a point that left `[0,w]x[0,h]` back inside, flipping the matching
/// heading component.
pub(super) fn reflect(pos: &mut Point, dir: &mut f64, w: f64, h: f64) {
    for _ in 0..64 {
        if pos.x < 0.0 {
            pos.x = -pos.x;
            *dir = PI - *dir;
        } else if pos.x > w {
            pos.x = 2.0 * w - pos.x;
            *dir = PI - *dir;
        } else if pos.y < 0.0 {
            pos.y = -pos.y;
            *dir = -*dir;
        } else if pos.y > h {
            pos.y = 2.0 * h - pos.y;
            *dir = -*dir;
        } else {
            break;
        }
    }
    *pos = contain(*pos, w, h);
}

/// Fresh state for `model` with a uniform initial position.
pub fn init_entity<R: Rng + ?Sized>(model: EntityModel, p: &ModelParams, rng: &mut R) -> MobilityState {
    let pos = uniform_point(p, rng);
    let mut s = MobilityState::at(pos);
    match model {
        EntityModel::RandomWalk => s.memory = Memory::Leg { remaining: 0.0 },
        EntityModel::RandomWaypoint => {
            s.speed = uniform_speed(p, rng);
            let target = uniform_point(p, rng);
            s.direction = (target.y - pos.y).atan2(target.x - pos.x);
            s.memory = Memory::Waypoint { target, pause_left: 0.0 };
        }
        EntityModel::RandomDirection => {
            s.speed = uniform_speed(p, rng);
            s.direction = rng.random_range(0.0..TAU);
            s.memory = Memory::Wall { pause_left: 0.0 };
        }
        EntityModel::Boundless => {
            s.speed = rng.random_range(0.0..=p.max_speed);
            s.direction = rng.random_range(0.0..TAU);
        }
        EntityModel::GaussMarkov => {
            s.speed = p.gm_mean_speed;
            s.direction = rng.random_range(0.0..TAU);
        }
        EntityModel::ProbabilisticWalk => {
            s.memory = Memory::Walker {
                x: AxisState::Stay,
                y: AxisState::Stay,
            };
        }
        EntityModel::CitySection => {
            let streets = p.streets();
            let at = (rng.random_range(0..streets.nx), rng.random_range(0..streets.ny));
            s.pos = streets.intersection(at);
            s.memory = Memory::City(CityMemory {
                at,
                route: Default::default(),
                progress: 0.0,
                pause_left: 0.0,
            });
        }
    }
    s
}

pub fn step_entity<R: Rng + ?Sized>(
    model: EntityModel,
    s: MobilityState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<MobilityState, MobilityError> {
    Ok(match model {
        EntityModel::RandomWalk => step_random_walk(s, p, rng),
        EntityModel::RandomWaypoint => step_random_waypoint(s, p, rng),
        EntityModel::RandomDirection => step_random_direction(s, p, rng),
        EntityModel::Boundless => step_boundless(s, p, rng),
        EntityModel::GaussMarkov => step_gauss_markov(s, p, rng)?,
        EntityModel::ProbabilisticWalk => step_probabilistic_walk(s, p, rng)?,
        EntityModel::CitySection => step_city_section(s, p, rng)?,
    })
}

/// Random walk with reflecting walls. A new speed and heading are drawn
/// whenever the current leg runs out.
pub fn step_random_walk<R: Rng + ?Sized>(mut s: MobilityState, p: &ModelParams, rng: &mut R) -> MobilityState {
    let dt = p.step_time;
    let mut remaining = match s.memory {
        Memory::Leg { remaining } => remaining,
        _ => 0.0,
    };
    if remaining <= 0.0 {
        s.speed = uniform_speed(p, rng);
        s.direction = rng.random_range(0.0..TAU);
        remaining = match p.walk_mode {
            WalkMode::Time => p.walk_interval,
            WalkMode::Distance if s.speed > 0.0 => p.walk_distance / s.speed,
            WalkMode::Distance => p.walk_interval,
        };
    }
    s.pos = s.pos + heading(s.direction) * (s.speed * dt);
    reflect(&mut s.pos, &mut s.direction, p.width, p.height);
    s.memory = Memory::Leg {
        remaining: remaining - dt,
    };
    s
}

/// Straight-line travel to a stored waypoint, a pause on arrival, then a new
/// uniform waypoint and speed.
pub fn step_random_waypoint<R: Rng + ?Sized>(mut s: MobilityState, p: &ModelParams, rng: &mut R) -> MobilityState {
    let dt = p.step_time;
    let (mut target, mut pause_left) = match s.memory {
        Memory::Waypoint { target, pause_left } => (target, pause_left),
        _ => (s.pos, 0.0),
    };
    let redraw = |s: &mut MobilityState, target: &mut Point, rng: &mut R| {
        *target = uniform_point(p, rng);
        s.speed = uniform_speed(p, rng);
        s.direction = (target.y - s.pos.y).atan2(target.x - s.pos.x);
    };
    if pause_left > 0.0 {
        pause_left -= dt;
        if pause_left <= 0.0 {
            pause_left = 0.0;
            redraw(&mut s, &mut target, rng);
        }
    } else {
        let gap = s.pos.dist(target);
        let reach = s.speed * dt;
        if reach >= gap {
            s.pos = target;
            if p.pause_time > 0.0 {
                pause_left = p.pause_time;
            } else {
                redraw(&mut s, &mut target, rng);
            }
        } else {
            s.direction = (target.y - s.pos.y).atan2(target.x - s.pos.x);
            s.pos = s.pos + heading(s.direction) * reach;
        }
    }
    s.pos = contain(s.pos, p.width, p.height);
    s.memory = Memory::Waypoint { target, pause_left };
    s
}

fn on_walls(pos: Point, p: &ModelParams) -> [bool; 4] {
    let eps_x = 1e-9 * p.width.max(1.0);
    let eps_y = 1e-9 * p.height.max(1.0);
    [
        pos.x <= eps_x,
        pos.x >= p.width - eps_x - p.width * f64::EPSILON,
        pos.y <= eps_y,
        pos.y >= p.height - eps_y - p.height * f64::EPSILON,
    ]
}

fn interior_heading<R: Rng + ?Sized>(pos: Point, p: &ModelParams, rng: &mut R) -> f64 {
    let [left, right, bottom, top] = on_walls(pos, p);
    loop {
        let d = rng.random_range(0.0..TAU);
        let (c, sn) = (d.cos(), d.sin());
        if (left && c <= 0.0) || (right && c >= 0.0) || (bottom && sn <= 0.0) || (top && sn >= 0.0) {
            continue;
        }
        return d;
    }
}

/// Travel until a wall is hit, pause there, then leave along a fresh heading
/// into the interior.
pub fn step_random_direction<R: Rng + ?Sized>(mut s: MobilityState, p: &ModelParams, rng: &mut R) -> MobilityState {
    let dt = p.step_time;
    let mut pause_left = match s.memory {
        Memory::Wall { pause_left } => pause_left,
        _ => 0.0,
    };
    if pause_left > 0.0 {
        pause_left -= dt;
        if pause_left <= 0.0 {
            pause_left = 0.0;
            s.direction = interior_heading(s.pos, p, rng);
            s.speed = uniform_speed(p, rng);
        }
        s.memory = Memory::Wall { pause_left };
        return s;
    }
    let h = heading(s.direction);
    let reach = s.speed * dt;
    // Parametric distance to the first wall along the heading.
    let mut hit = f64::INFINITY;
    if h.x > 0.0 {
        hit = hit.min((p.width - s.pos.x) / h.x);
    } else if h.x < 0.0 {
        hit = hit.min(-s.pos.x / h.x);
    }
    if h.y > 0.0 {
        hit = hit.min((p.height - s.pos.y) / h.y);
    } else if h.y < 0.0 {
        hit = hit.min(-s.pos.y / h.y);
    }
    if reach >= hit {
        let raw = s.pos + h * hit.max(0.0);
        // Snap the wall coordinate exactly so the wall test is unambiguous.
        let snap = |v: f64, hi: f64| if v <= 1e-9 * hi { 0.0 } else if v >= hi * (1.0 - 1e-9) { hi } else { v };
        s.pos = contain(Point::new(snap(raw.x, p.width), snap(raw.y, p.height)), p.width, p.height);
        if p.pause_time > 0.0 {
            pause_left = p.pause_time;
        } else {
            s.direction = interior_heading(s.pos, p, rng);
            s.speed = uniform_speed(p, rng);
        }
    } else {
        s.pos = contain(s.pos + h * reach, p.width, p.height);
    }
    s.memory = Memory::Wall { pause_left };
    s
}

fn wrap(v: f64, size: f64) -> f64 {
    let w = v.rem_euclid(size);
    if w >= size {
        0.0
    } else {
        w
    }
}

/// Torus world: bounded random changes of speed and heading, positions wrap.
pub fn step_boundless<R: Rng + ?Sized>(mut s: MobilityState, p: &ModelParams, rng: &mut R) -> MobilityState {
    let dt = p.step_time;
    let dv_max = p.max_accel * dt;
    let dtheta_max = p.max_angular_change * dt;
    let dv = if dv_max > 0.0 { rng.random_range(-dv_max..=dv_max) } else { 0.0 };
    let dtheta = if dtheta_max > 0.0 {
        rng.random_range(-dtheta_max..=dtheta_max)
    } else {
        0.0
    };
    s.speed = (s.speed + dv).clamp(0.0, p.max_speed);
    s.direction += dtheta;
    let moved = s.pos + heading(s.direction) * (s.speed * dt);
    s.pos = Point::new(wrap(moved.x, p.width), wrap(moved.y, p.height));
    s
}

/// First-order autoregressive speed and heading. Within `gm_edge_margin` of a
/// wall the mean heading points at the area center.
pub fn step_gauss_markov<R: Rng + ?Sized>(
    mut s: MobilityState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<MobilityState, MobilityError> {
    let a = p.gm_alpha;
    if !(0.0..=1.0).contains(&a) {
        return Err(MobilityError::OutOfRange {
            key: "gm-alpha",
            detail: format!("{a} not in [0, 1]"),
        });
    }
    let m = p.gm_edge_margin;
    let near_edge = s.pos.x < m || s.pos.y < m || s.pos.x > p.width - m || s.pos.y > p.height - m;
    let mean_dir = if near_edge {
        (p.height / 2.0 - s.pos.y).atan2(p.width / 2.0 - s.pos.x)
    } else {
        p.gm_mean_direction
    };
    let g_s: f64 = StandardNormal.sample(rng);
    let g_d: f64 = StandardNormal.sample(rng);
    let mix = (1.0 - a * a).sqrt();
    s.speed = a * s.speed + (1.0 - a) * p.gm_mean_speed + mix * p.gm_speed_std * g_s;
    s.direction = a * s.direction + (1.0 - a) * mean_dir + mix * p.gm_direction_std * g_d;
    // The autoregressive speed may dip below zero; the node then stands still.
    s.pos = s.pos + heading(s.direction) * (s.speed.max(0.0) * p.step_time);
    let mut dir = s.direction;
    reflect(&mut s.pos, &mut dir, p.width, p.height);
    s.direction = dir;
    Ok(s)
}

fn next_axis<R: Rng + ?Sized>(cur: AxisState, m: &[[f64; 3]; 3], rng: &mut R) -> AxisState {
    let row = &m[cur as usize];
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pr) in row.iter().enumerate() {
        acc += pr;
        if u < acc {
            return AxisState::ALL[i];
        }
    }
    // Rounding slack: fall back to the last state with positive mass.
    AxisState::ALL[row.iter().rposition(|&pr| pr > 0.0).unwrap_or(cur as usize)]
}

/// Per-axis three-state chain; each step moves `prob_step` meters in the
/// direction of the new state. Moves that would leave the area are dropped.
pub fn step_probabilistic_walk<R: Rng + ?Sized>(
    mut s: MobilityState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<MobilityState, MobilityError> {
    for row in &p.prob_matrix {
        if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MobilityError::OutOfRange {
                key: "prob-matrix",
                detail: format!("row {row:?} is not a distribution"),
            });
        }
    }
    let (sx, sy) = match s.memory {
        Memory::Walker { x, y } => (x, y),
        _ => (AxisState::Stay, AxisState::Stay),
    };
    let nx = next_axis(sx, &p.prob_matrix, rng);
    let ny = next_axis(sy, &p.prob_matrix, rng);
    let x = s.pos.x + nx.offset() * p.prob_step;
    let y = s.pos.y + ny.offset() * p.prob_step;
    if (0.0..p.width).contains(&x) {
        s.pos.x = x;
    }
    if (0.0..p.height).contains(&y) {
        s.pos.y = y;
    }
    s.speed = p.prob_step / p.step_time * (nx.offset().abs().max(ny.offset().abs()));
    s.memory = Memory::Walker { x: nx, y: ny };
    Ok(s)
}

/// Street-constrained travel between random intersections along the fastest
/// route, pausing at each destination.
pub fn step_city_section<R: Rng + ?Sized>(
    s: MobilityState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<MobilityState, MobilityError> {
    city::step(s, p, rng)
}
