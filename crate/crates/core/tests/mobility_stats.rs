use locsim::mobility::{
    emit_zone_crossings, generate_trace, init_entity, matrix_walk, step_entity, EntityModel, ModelKind, ModelParams, Point,
};
use locsim::topology::{Topology, ZoneGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn random_walk_has_no_drift() {
    let p = ModelParams {
        width: 1e9,
        height: 1e9,
        walk_interval: 10.0,
        step_time: 10.0,
        ..ModelParams::default()
    };
    let mut r = rng(1);
    let mut s = init_entity(EntityModel::RandomWalk, &p, &mut r);
    s.pos = Point::new(5e8, 5e8);
    let (mut dx, mut dy) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let before = s.pos;
        s = step_entity(EntityModel::RandomWalk, s, &p, &mut r).unwrap();
        dx.push(s.pos.x - before.x);
        dy.push(s.pos.y - before.y);
    }
    for d in [dx, dy] {
        let (m, se) = mean_and_se(&d);
        assert!(m.abs() < 4.0 * se, "drift {m} with standard error {se}");
        assert!(se > 0.0);
    }
}

const SIDE: f64 = 1000.0;
const BINS: usize = 5;

fn histogram(points: impl Iterator<Item = Point>) -> Vec<f64> {
    let mut h = [0.0; BINS * BINS];
    let mut n = 0.0;
    for p in points {
        let i = ((p.x / SIDE * BINS as f64) as usize).min(BINS - 1);
        let j = ((p.y / SIDE * BINS as f64) as usize).min(BINS - 1);
        h[j * BINS + i] += 1.0;
        n += 1.0;
    }
    h.iter().map(|c| c / n).collect()
}

fn center_share(h: &[f64]) -> f64 {
    (1..BINS - 1)
        .flat_map(|j| (1..BINS - 1).map(move |i| (i, j)))
        .map(|(i, j)| h[j * BINS + i])
        .sum()
}

fn sample_model(model: EntityModel, p: &ModelParams, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    let mut nodes: Vec<_> = (0..200).map(|_| init_entity(model, p, &mut r)).collect();
    let mut out = Vec::with_capacity(1_000_000);
    for step in 0..8000 {
        for s in nodes.iter_mut() {
            *s = step_entity(model, s.clone(), p, &mut r).unwrap();
            if step >= 3000 {
                out.push(s.pos);
            }
        }
    }
    out
}

/// Stationary waypoint positions without pauses: a uniform point on a
/// segment between two uniform points, segments weighted by length.
fn waypoint_oracle(n: usize, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    let max_len = SIDE * 2f64.sqrt();
    while out.len() < n {
        let a = Point::new(r.random_range(0.0..SIDE), r.random_range(0.0..SIDE));
        let b = Point::new(r.random_range(0.0..SIDE), r.random_range(0.0..SIDE));
        if r.random::<f64>() * max_len > a.dist(b) {
            continue;
        }
        let t: f64 = r.random();
        out.push(a + (b - a) * t);
    }
    out
}

fn area() -> ModelParams {
    ModelParams {
        width: SIDE,
        height: SIDE,
        min_speed: 5.0,
        max_speed: 20.0,
        pause_time: 0.0,
        step_time: 1.0,
        ..ModelParams::default()
    }
}

#[test]
fn waypoint_density_matches_segment_oracle() {
    let sim = histogram(sample_model(EntityModel::RandomWaypoint, &area(), 2).into_iter());
    let oracle = histogram(waypoint_oracle(1_000_000, 3).into_iter());
    for (k, (s, o)) in sim.iter().zip(&oracle).enumerate() {
        assert!((s - o).abs() < 0.005, "bin {k}: simulated {s} oracle {o}");
    }
    assert!(center_share(&sim) > 0.36 + 0.05, "center share {}", center_share(&sim));
}

/// Continuous-time chain of wall-to-wall legs: each leg leaves its wall
/// point at a uniform interior angle; positions are sampled uniformly in
/// time, so each leg is weighted by its duration.
fn direction_oracle(n: usize, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut at = Point::new(r.random_range(0.0..SIDE), 0.0);
    let mut legs = Vec::new();
    let mut total = 0.0;
    while legs.len() < n / 4 {
        let d = loop {
            let d = r.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (d.cos(), d.sin());
            let blocked = (at.x <= 0.0 && c <= 0.0)
                || (at.x >= SIDE && c >= 0.0)
                || (at.y <= 0.0 && s <= 0.0)
                || (at.y >= SIDE && s >= 0.0);
            if !blocked {
                break (c, s);
            }
        };
        let tx = if d.0 > 0.0 { (SIDE - at.x) / d.0 } else if d.0 < 0.0 { -at.x / d.0 } else { f64::INFINITY };
        let ty = if d.1 > 0.0 { (SIDE - at.y) / d.1 } else if d.1 < 0.0 { -at.y / d.1 } else { f64::INFINITY };
        let len = tx.min(ty);
        let speed = r.random_range(5.0..20.0);
        let mut end = Point::new(at.x + d.0 * len, at.y + d.1 * len);
        if tx <= ty {
            end.x = if d.0 > 0.0 { SIDE } else { 0.0 };
        } else {
            end.y = if d.1 > 0.0 { SIDE } else { 0.0 };
        }
        total += len / speed;
        legs.push((at, end, total));
        at = end;
    }
    while out.len() < n {
        let t = r.random_range(0.0..total);
        let i = legs.partition_point(|l| l.2 < t);
        let (a, b, _) = legs[i];
        let u: f64 = r.random();
        out.push(a + (b - a) * u);
    }
    out
}

#[test]
fn random_direction_matches_oracle_and_is_flatter_than_waypoint() {
    let sim = histogram(sample_model(EntityModel::RandomDirection, &area(), 4).into_iter());
    let oracle = histogram(direction_oracle(1_000_000, 11).into_iter());
    for (k, (s, o)) in sim.iter().zip(&oracle).enumerate() {
        assert!((s - o).abs() < 0.005, "bin {k}: simulated {s} oracle {o}");
    }
    let uniform = 1.0 / (BINS * BINS) as f64;
    for (k, s) in sim.iter().enumerate() {
        assert!((s - uniform).abs() < 0.5 * uniform, "bin {k}: {s}");
    }
    let waypoint = histogram(sample_model(EntityModel::RandomWaypoint, &area(), 2).into_iter());
    assert!(center_share(&sim) < center_share(&waypoint));
}

fn lag1(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}

#[test]
fn gauss_markov_speed_autocorrelation_tracks_alpha() {
    for (alpha, seed) in [(0.3, 5), (0.75, 6), (0.95, 7)] {
        let p = ModelParams {
            gm_alpha: alpha,
            ..ModelParams::default()
        };
        let mut r = rng(seed);
        let mut s = init_entity(EntityModel::GaussMarkov, &p, &mut r);
        let speeds: Vec<f64> = (0..100_000)
            .map(|_| {
                s = step_entity(EntityModel::GaussMarkov, s.clone(), &p, &mut r).unwrap();
                s.speed
            })
            .collect();
        let rho = lag1(&speeds);
        assert!((rho - alpha).abs() < 0.05, "alpha {alpha}: lag-1 {rho}");
    }
}

#[test]
fn crossings_match_an_independent_scan() {
    let topo = Topology::canonical();
    let grid = topo.grid.as_ref().unwrap();
    let p = ModelParams {
        width: grid.width(),
        height: grid.height(),
        ..ModelParams::default()
    };
    let kind: ModelKind = "random-waypoint".parse().unwrap();
    let records = generate_trace(kind, &p, 12, 2000.0, &mut rng(8)).unwrap();
    let moves = emit_zone_crossings(&records, grid).unwrap();
    let size = grid.cell_size();
    let mut expected = 0;
    for node in 0..12 {
        let zones: Vec<_> = records
            .iter()
            .filter(|r| r.node == node)
            .map(|r| grid.zone_of_cell((r.y / size) as usize, (r.x / size) as usize))
            .collect();
        expected += zones.windows(2).filter(|w| w[0] != w[1]).count();
    }
    assert!(expected > 50);
    assert_eq!(moves.len(), expected);
}

#[test]
fn matrix_walk_frequencies() {
    let topo = Topology::parse(
        "root R\nedge R x\nedge R y\nedge x a\nedge x b\nedge y c\nedge y d\n\
         zone a 0 0 0 0\nzone b 0 1 0 1\nzone c 1 0 1 0\nzone d 1 1 1 1\n\
         move a b:0.5 c:0.5\nmove b a:1\nmove c a:1\nmove d d:1\n",
    )
    .unwrap();
    let grid: &ZoneGrid = topo.grid.as_ref().unwrap();
    let t = &topo.tree;
    let (a, b, d) = (t.id("a").unwrap(), t.id("b").unwrap(), t.id("d").unwrap());
    let mut r = rng(9);
    let n = 100_000;
    let to_b = (0..n).filter(|_| matrix_walk(a, grid, &mut r).unwrap() == b).count();
    let share = to_b as f64 / n as f64;
    assert!((share - 0.5).abs() < 0.01, "{share}");
    assert!((0..1000).all(|_| matrix_walk(d, grid, &mut r).unwrap() == d));
    assert!((0..1000).all(|_| matrix_walk(b, grid, &mut r).unwrap() == a));
}

#[test]
fn city_positions_stay_on_streets() {
    let p = ModelParams {
        pause_time: 5.0,
        ..ModelParams::default()
    };
    let streets = p.streets();
    let mut r = rng(10);
    let mut s = init_entity(EntityModel::CitySection, &p, &mut r);
    for _ in 0..100_000 {
        s = step_entity(EntityModel::CitySection, s, &p, &mut r).unwrap();
        assert!(streets.on_street(s.pos, 1e-6), "{:?}", s.pos);
    }
}
