use std::collections::VecDeque;

use rand::Rng;

use super::{Memory, MobilityError, MobilityState, ModelParams, Point};

type Crossing = (usize, usize);

/// Manhattan street grid: `nx` vertical and `ny` horizontal streets spaced
/// `block` meters apart, starting at `origin`. Each street has its own speed
/// limit.
#[derive(Clone, Debug, PartialEq)]
pub struct StreetGrid {
    pub origin: Point,
    pub block: f64,
    pub nx: usize,
    pub ny: usize,
    /// Speed limit of horizontal street `j` (constant y), m/s.
    pub speed_h: Vec<f64>,
    /// Speed limit of vertical street `i` (constant x), m/s.
    pub speed_v: Vec<f64>,
}

/// Route progress of a city-section node.
#[derive(Clone, Debug, PartialEq)]
pub struct CityMemory {
    /// Last intersection reached.
    pub at: Crossing,
    /// Intersections still to visit, next first.
    pub route: VecDeque<Crossing>,
    /// Meters covered from `at` toward the head of `route`.
    pub progress: f64,
    pub pause_left: f64,
}

impl StreetGrid {
    /// Evenly spaced streets covering a `width x height` area, half a block
    /// in from the lower walls, all with the same speed limit.
    pub fn fitted(width: f64, height: f64, block: f64, speed: f64) -> Self {
        let count = |side: f64| (((side - block / 2.0) / block).ceil().max(1.0)) as usize;
        let nx = count(width);
        let ny = count(height);
        Self {
            origin: Point::new(block / 2.0, block / 2.0),
            block,
            nx,
            ny,
            speed_h: vec![speed; ny],
            speed_v: vec![speed; nx],
        }
    }

    pub fn intersection(&self, (i, j): Crossing) -> Point {
        Point::new(self.origin.x + i as f64 * self.block, self.origin.y + j as f64 * self.block)
    }

    pub fn intersections(&self) -> usize {
        self.nx * self.ny
    }

    fn segment_speed(&self, a: Crossing, b: Crossing) -> f64 {
        if a.1 == b.1 {
            self.speed_h[a.1]
        } else {
            self.speed_v[a.0]
        }
    }

    /// True when `p` lies on some street segment within `tol` meters.
    pub fn on_street(&self, p: Point, tol: f64) -> bool {
        let x_max = self.origin.x + (self.nx - 1) as f64 * self.block;
        let y_max = self.origin.y + (self.ny - 1) as f64 * self.block;
        let within = |v: f64, lo: f64, hi: f64| v >= lo - tol && v <= hi + tol;
        let on_line = |v: f64, o: f64| {
            let k = ((v - o) / self.block).round();
            (v - (o + k * self.block)).abs() <= tol
        };
        (within(p.x, self.origin.x, x_max) && within(p.y, self.origin.y, y_max))
            && (on_line(p.x, self.origin.x) || on_line(p.y, self.origin.y))
    }

    pub fn validate(&self, width: f64, height: f64) -> Result<(), MobilityError> {
        let bad = |detail: String| MobilityError::OutOfRange { key: "street-grid", detail };
        if self.nx == 0 || self.ny == 0 {
            return Err(bad("needs at least one street each way".into()));
        }
        if !(self.block > 0.0 && self.block.is_finite()) {
            return Err(bad(format!("block {} must be positive", self.block)));
        }
        if self.speed_h.len() != self.ny || self.speed_v.len() != self.nx {
            return Err(bad("one speed limit per street required".into()));
        }
        if let Some(v) = self.speed_h.iter().chain(&self.speed_v).find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(bad(format!("speed limit {v} must be positive")));
        }
        let far = self.intersection((self.nx - 1, self.ny - 1));
        if self.origin.x < 0.0 || self.origin.y < 0.0 || far.x >= width || far.y >= height {
            return Err(bad("streets extend outside the area".into()));
        }
        Ok(())
    }

    fn neighbors(&self, (i, j): Crossing) -> impl Iterator<Item = Crossing> + '_ {
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push((i - 1, j));
        }
        if i + 1 < self.nx {
            out.push((i + 1, j));
        }
        if j > 0 {
            out.push((i, j - 1));
        }
        if j + 1 < self.ny {
            out.push((i, j + 1));
        }
        out.into_iter()
    }
}

/// Fastest route by travel time. Excludes `from`, ends at `to`; empty when
/// they coincide. Ties go to the lower `(j, i)` intersection index.
pub fn plan_route(g: &StreetGrid, from: Crossing, to: Crossing) -> Result<VecDeque<Crossing>, MobilityError> {
    let n = g.intersections();
    let idx = |(i, j): Crossing| j * g.nx + i;
    let at = |k: usize| (k % g.nx, k / g.nx);
    if from.0 >= g.nx || from.1 >= g.ny || to.0 >= g.nx || to.1 >= g.ny {
        return Err(MobilityError::Unreachable { from, to });
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[idx(from)] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n)
            .filter(|&k| !done[k] && dist[k].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        else {
            break;
        };
        done[u] = true;
        if u == idx(to) {
            break;
        }
        for v in g.neighbors(at(u)) {
            let nd = dist[u] + g.block / g.segment_speed(at(u), v);
            let k = idx(v);
            if nd < dist[k] {
                dist[k] = nd;
                prev[k] = u;
            }
        }
    }
    if !dist[idx(to)].is_finite() {
        return Err(MobilityError::Unreachable { from, to });
    }
    let mut route = VecDeque::new();
    let mut k = idx(to);
    while k != idx(from) {
        route.push_front(at(k));
        k = prev[k];
    }
    Ok(route)
}

/// Street length of `route` starting at `from`, meters.
pub fn route_length(g: &StreetGrid, from: Crossing, route: &VecDeque<Crossing>) -> f64 {
    let mut last = from;
    let mut total = 0.0;
    for &c in route {
        total += g.intersection(last).dist(g.intersection(c));
        last = c;
    }
    total
}

fn pick_destination<R: Rng + ?Sized>(g: &StreetGrid, m: &mut CityMemory, p: &ModelParams, rng: &mut R) -> Result<(), MobilityError> {
    let dest = (rng.random_range(0..g.nx), rng.random_range(0..g.ny));
    m.route = plan_route(g, m.at, dest)?;
    m.progress = 0.0;
    if m.route.is_empty() {
        m.pause_left = p.pause_time;
    }
    Ok(())
}

pub(super) fn step<R: Rng + ?Sized>(mut s: MobilityState, p: &ModelParams, rng: &mut R) -> Result<MobilityState, MobilityError> {
    let g = p.streets();
    let mut m = match s.memory {
        Memory::City(m) => m,
        _ => {
            return Err(MobilityError::WrongModel {
                model: format!("{:?}", s.memory),
                expected: "city-section",
            })
        }
    };
    let dt = p.step_time;
    if m.pause_left > 0.0 {
        m.pause_left -= dt;
        if m.pause_left <= 0.0 {
            m.pause_left = 0.0;
            pick_destination(&g, &mut m, p, rng)?;
        }
    } else {
        if m.route.is_empty() {
            pick_destination(&g, &mut m, p, rng)?;
        }
        let mut budget = dt;
        while budget > 0.0 {
            let Some(&next) = m.route.front() else { break };
            let v = g.segment_speed(m.at, next);
            let need = (g.block - m.progress) / v;
            if need <= budget {
                budget -= need;
                m.at = next;
                m.progress = 0.0;
                m.route.pop_front();
                if m.route.is_empty() {
                    m.pause_left = p.pause_time;
                    break;
                }
            } else {
                m.progress += v * budget;
                budget = 0.0;
            }
        }
    }
    let base = g.intersection(m.at);
    match m.route.front() {
        Some(&next) if m.pause_left <= 0.0 => {
            let d = g.intersection(next) - base;
            s.direction = d.y.atan2(d.x);
            s.speed = g.segment_speed(m.at, next);
            s.pos = base + d * (m.progress / g.block);
        }
        _ => {
            s.speed = 0.0;
            s.pos = base;
        }
    }
    s.memory = Memory::City(m);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> StreetGrid {
        StreetGrid {
            origin: Point::new(50.0, 50.0),
            block: 100.0,
            nx: 2,
            ny: 2,
            speed_h: vec![10.0, 10.0],
            speed_v: vec![10.0, 10.0],
        }
    }

    #[test]
    fn opposite_corner_is_manhattan() {
        let g = small();
        let r = plan_route(&g, (0, 0), (1, 1)).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(route_length(&g, (0, 0), &r), 200.0);
    }

    #[test]
    fn fast_street_wins() {
        let mut g = StreetGrid::fitted(1000.0, 1000.0, 200.0, 5.0);
        g.speed_h[0] = 50.0;
        g.speed_v[4] = 50.0;
        let r = plan_route(&g, (0, 1), (4, 4)).unwrap();
        // Detours down to the fast street, along it, then up the fast avenue.
        assert_eq!(r.front(), Some(&(0, 0)));
        assert!(route_length(&g, (0, 1), &r) > 200.0 * 7.0);
    }

    #[test]
    fn same_destination_pauses_immediately() {
        let g = small();
        let p = ModelParams {
            street: Some(g.clone()),
            pause_time: 5.0,
            ..ModelParams::default()
        };
        let mut m = CityMemory {
            at: (0, 0),
            route: VecDeque::new(),
            progress: 0.0,
            pause_left: 0.0,
        };
        // Find a seed whose first draw lands on (0,0).
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut probe = m.clone();
            pick_destination(&g, &mut probe, &p, &mut rng).unwrap();
            if probe.route.is_empty() {
                m = probe;
                break;
            }
        }
        assert_eq!(m.pause_left, 5.0);
    }

    #[test]
    fn positions_stay_on_streets() {
        let p = ModelParams {
            pause_time: 3.0,
            step_time: 1.7,
            ..ModelParams::default()
        };
        let g = p.streets();
        g.validate(p.width, p.height).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = super::super::init_entity(super::super::EntityModel::CitySection, &p, &mut rng);
        for _ in 0..20_000 {
            s = step(s, &p, &mut rng).unwrap();
            assert!(g.on_street(s.pos, 1e-6), "{:?}", s.pos);
        }
    }
}
