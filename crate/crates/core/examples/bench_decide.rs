use pedsim::agents::{build_controller, AgentKind, SimRng};
use pedsim::harness::{train_qtable, ExperimentGrid};
use pedsim::world::spawn_initial;
use rand::SeedableRng;
use std::sync::Arc;
fn main() {
    let grid = ExperimentGrid::default();
    let q = Arc::new(train_qtable(&grid).unwrap());
    for kind in AgentKind::ALL {
        if kind == AgentKind::Mpc {
            continue;
        }
        for n in [1usize, 5] {
            let mut rng = SimRng::seed_from_u64(3);
            let w = spawn_initial(&mut rng, n, &grid.config.world).unwrap();
            let mut c = build_controller(kind, &grid.config, Some(&q), n).unwrap();
            let iters = 2_000_000;
            let t = std::time::Instant::now();
            for _ in 0..iters {
                std::hint::black_box(c.decide(&w, &mut rng).unwrap());
            }
            println!(
                "{kind} n={n}: {:.1} ns/decide",
                t.elapsed().as_nanos() as f64 / iters as f64
            );
        }
    }
}
