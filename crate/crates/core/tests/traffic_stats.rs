use locsim::engine::run;
use locsim::scenario::{Horizon, Scenario};
use locsim::traffic::{next_call_time, pick_callee, CallParams, PreferredSets};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const DRAWS: usize = 100_000;

#[test]
fn exponential_gap_mean() {
    let mut r = rng(1);
    let gaps: Vec<f64> = (0..DRAWS).map(|_| next_call_time(3.0, 2.0, &mut r).unwrap() - 3.0).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    let mean = gaps.iter().sum::<f64>() / DRAWS as f64;
    assert!((mean - 0.5).abs() <= 0.005, "mean gap {mean}");
}

#[test]
fn unskewed_callees_are_uniform() {
    let n = 11;
    let mut r = rng(2);
    let sets = PreferredSets::assign(n, 5, &mut r);
    let params = CallParams {
        preferred_prob: 0.0,
        ..CallParams::default()
    };
    let mut hits = vec![0usize; n];
    for _ in 0..DRAWS {
        hits[pick_callee(4, &sets, &params, &mut r).unwrap() as usize] += 1;
    }
    assert_eq!(hits[4], 0);
    for (u, &h) in hits.iter().enumerate().filter(|&(u, _)| u != 4) {
        let f = h as f64 / DRAWS as f64;
        assert!((f - 0.1).abs() <= 0.01, "user {u}: {f}");
    }
}

#[test]
fn preferred_mass_matches_skew() {
    let mut r = rng(3);
    let sets = PreferredSets::assign(100, 5, &mut r);
    let params = CallParams::default();
    let caller = 17;
    let set = sets.of(caller).to_vec();
    assert_eq!(set.len(), 5);
    let inside = (0..DRAWS)
        .filter(|_| set.contains(&pick_callee(caller, &sets, &params, &mut r).unwrap()))
        .count();
    // Non-preferred draws also land in the set with probability 5/99.
    let expected = 0.8 + 0.2 * 5.0 / 99.0;
    let share = inside as f64 / DRAWS as f64;
    assert!((share - expected).abs() <= 0.01, "preferred share {share}, expected {expected}");
}

#[test]
fn realized_cmr_tracks_configured() {
    for cmr in [0.5, 1.0, 4.0] {
        for sc in [Scenario::canonical(5), Scenario::canonical_waypoint(5)] {
            let mut sc = sc.with_cmr(cmr);
            sc.horizon = Horizon::Events(20_000);
            let res = run(&sc).unwrap();
            let realized = res.ledger.realized_cmr().unwrap();
            assert!(
                (realized / cmr - 1.0).abs() <= 0.05,
                "cmr {cmr}: realized {realized} ({:?})",
                sc.mobility
            );
        }
    }
}
