//! Monte Carlo checks of the stochastic policies against their closed forms.

use rand::SeedableRng;

use pedsim::agents::{
    decide_constrained_random, decide_random, fresh_draw, AgentConfig, AgentKind, CrossingLatch,
    PedestrianAction, SimRng,
};
use pedsim::world::{PedId, PedestrianState, Vec2};

#[test]
fn fresh_draw_frequency_matches_epsilon() {
    let eps = 0.1;
    let steps = 100_000;
    let mut rng = SimRng::seed_from_u64(11);
    let draws = (0..steps)
        .filter(|_| fresh_draw(eps, &mut rng).is_some())
        .count();
    let freq = draws as f64 / steps as f64;
    assert!((freq - eps).abs() <= 0.01, "fresh-draw frequency {freq}");
}

#[test]
fn random_policy_changes_action_at_the_expected_rate() {
    // A fresh draw lands on the held action one time in five.
    let cfg = AgentConfig::new(AgentKind::Random, 0.1, 25.0).unwrap();
    let steps = 100_000;
    let mut rng = SimRng::seed_from_u64(12);
    let mut last = PedestrianAction::Noop;
    let mut changes = 0;
    for _ in 0..steps {
        let a = decide_random(&cfg, last, &mut rng);
        changes += usize::from(a != last);
        last = a;
    }
    let freq = changes as f64 / steps as f64;
    assert!((freq - 0.08).abs() <= 0.01, "change frequency {freq}");
}

#[test]
fn constrained_onset_is_geometric() {
    let eps = 0.05;
    let cfg = AgentConfig::new(AgentKind::RandomConstrained, eps, 25.0).unwrap();
    let ped = PedestrianState {
        id: PedId(0),
        position: Vec2::new(50.0, 1.0),
        heading: 0.0,
        speed: 0.0,
        crossing: None,
    };
    let seeds = 10_000u64;
    let mut total = 0u64;
    for seed in 0..seeds {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut latch = CrossingLatch::default();
        let mut step = 1u64;
        while decide_constrained_random(&cfg, &ped, &mut latch, &mut rng)
            != PedestrianAction::StartCrossing
        {
            step += 1;
        }
        assert!(latch.fired);
        assert_eq!(
            decide_constrained_random(&cfg, &ped, &mut latch, &mut rng),
            PedestrianAction::Noop
        );
        total += step;
    }
    let mean = total as f64 / seeds as f64;
    assert!(
        (mean * eps - 1.0).abs() <= 0.05,
        "mean onset {mean} vs {}",
        1.0 / eps
    );
}
