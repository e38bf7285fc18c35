//! Test-only oracles shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pedsim::agents::PedestrianAction;
use pedsim::harness::{CURVES_FILE, RECORDS_FILE, SUMMARY_FILE};
use pedsim::mpc::{MpcConfig, MpcWeights};
use pedsim::world::{
    advance_pedestrian, angle_diff, CarState, Kinematics, PedId, PedestrianState, RoadGeometry,
    Vec2,
};

const MOVES: [PedestrianAction; 5] = [
    PedestrianAction::Noop,
    PedestrianAction::Accel,
    PedestrianAction::Decel,
    PedestrianAction::TurnLeft,
    PedestrianAction::TurnRight,
];

/// Sequence number `idx` in lexicographic order, most significant first.
pub fn sequence(idx: usize, n: usize) -> Vec<PedestrianAction> {
    let mut digits = vec![PedestrianAction::Noop; n];
    let mut rest = idx;
    for slot in digits.iter_mut().rev() {
        *slot = MOVES[rest % 5];
        rest /= 5;
    }
    digits
}

pub fn cost(
    seq: &[PedestrianAction],
    ped: &PedestrianState,
    car: &CarState,
    cfg: &MpcConfig,
    kin: &Kinematics,
    road: &RoadGeometry,
) -> f64 {
    let mut state = *ped;
    let mut dist = 0.0;
    let mut in_road = 0u32;
    let mut headings = Vec::new();
    for (i, &a) in seq.iter().enumerate() {
        state = advance_pedestrian(&state, a, kin, road, cfg.dt);
        // Same floating-point operation order as the planner, so costs agree
        // bit for bit.
        let c =
            car.position + Vec2::from_heading(car.heading) * ((i + 1) as f64 * cfg.dt * car.speed);
        dist += state.position.distance(c);
        if road.in_road(state.position) {
            in_road += 1;
        }
        headings.push(state.heading);
    }
    let mut turns = 0u32;
    for i in 1..headings.len() {
        if angle_diff(headings[i - 1], headings[i]).abs() > cfg.turn_epsilon {
            turns += 1;
        }
    }
    let w = &cfg.weights;
    w.distance * dist * cfg.dt + w.road * in_road as f64 * cfg.dt + w.turn * turns as f64
}

/// The minimum cost, the first sequence attaining it, and the cost of the
/// runner-up sequence.
pub fn brute_force(
    ped: &PedestrianState,
    car: &CarState,
    cfg: &MpcConfig,
    kin: &Kinematics,
    road: &RoadGeometry,
) -> (f64, Vec<PedestrianAction>, f64) {
    let n = cfg.horizon_steps;
    let mut best = (f64::INFINITY, Vec::new());
    let mut second = f64::INFINITY;
    for idx in 0..5usize.pow(n as u32) {
        let seq = sequence(idx, n);
        let c = cost(&seq, ped, car, cfg, kin, road);
        if c < best.0 {
            second = best.0;
            best = (c, seq);
        } else if c < second {
            second = c;
        }
    }
    (best.0, best.1, second)
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (PedestrianState, CarState, MpcConfig) {
    let road = RoadGeometry::default();
    let weight = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..5.0)
        }
    };
    let mut weights = MpcWeights {
        distance: weight(rng),
        road: weight(rng),
        turn: weight(rng),
    };
    if weights.distance == 0.0 && weights.road == 0.0 && weights.turn == 0.0 {
        weights.distance = 1.0;
    }
    let cfg = MpcConfig {
        horizon_steps: rng.gen_range(1..=4),
        dt: rng.gen_range(0.05..1.0),
        turn_epsilon: rng.gen_range(0.01..1.0),
        weights,
        ..MpcConfig::default()
    };
    let ped = PedestrianState {
        id: PedId(0),
        position: Vec2::new(
            rng.gen_range(0.0..road.road_length),
            rng.gen_range(0.0..road.height()),
        ),
        heading: rng.gen_range(-PI..PI),
        speed: rng.gen_range(0.0..2.5),
        crossing: None,
    };
    let car = CarState {
        position: Vec2::new(rng.gen_range(0.0..road.road_length), road.car_lane_center()),
        speed: rng.gen_range(0.0..15.0),
        ..CarState::default()
    };
    (ped, car, cfg)
}

pub fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Blanks CPU columns and rows so two runs can be compared byte for byte.
pub fn without_cpu(name: &Path, bytes: &[u8]) -> String {
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let blank = |col: usize| {
        text.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[col] = "-";
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    match name.to_str().unwrap() {
        RECORDS_FILE => blank(12),
        SUMMARY_FILE => blank(6),
        CURVES_FILE => text
            .lines()
            .filter(|l| !l.starts_with("mean_cpu_ms,"))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => text,
    }
}
