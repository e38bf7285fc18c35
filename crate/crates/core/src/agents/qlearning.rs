//! Tabular Q-learning over a coarse observation grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{observe, Observation, PedestrianAction, SimRng};
use crate::error::{Result, SimError};
use crate::seeds::derive_seed;
use crate::world::{
    angle_diff, classify_test_event, in_precondition_zone, spawn_initial, step, stopping_distance,
    CarState, PedestrianState, Region, RoadGeometry, TestEvent, Vec2, WorldConfig,
};

const N_MOVES: usize = PedestrianAction::MOVES.len();

/// Bins for the longitudinal car gap seen by a pedestrian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationGrid {
    pub gap_bin: f64,
    /// Gaps at or beyond this land in the last bin.
    pub max_gap: f64,
}

impl Default for ObservationGrid {
    fn default() -> Self {
        Self {
            gap_bin: 10.0,
            max_gap: 99.0,
        }
    }
}

impl ObservationGrid {
    pub fn gap_bins(&self) -> u32 {
        (self.max_gap / self.gap_bin).floor() as u32 + 1
    }

    /// (gap bin, sign) pairs x region x heading octant. A zero sign only
    /// occurs with a zero gap, so it pairs with the first bin alone.
    pub fn key_space_size(&self) -> u64 {
        (2 * self.gap_bins() as u64 + 1) * Region::ALL.len() as u64 * 8
    }

    /// Every key the grid can produce, in order.
    pub fn all_keys(&self) -> Vec<StateKey> {
        let mut keys = Vec::with_capacity(self.key_space_size() as usize);
        for gap_bin in 0..self.gap_bins() {
            let signs: &[i8] = if gap_bin == 0 { &[-1, 0, 1] } else { &[-1, 1] };
            for &sign in signs {
                for region in Region::ALL {
                    for octant in 0..8u8 {
                        keys.push(StateKey {
                            gap_bin,
                            sign,
                            region,
                            octant,
                        });
                    }
                }
            }
        }
        keys
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    pub gap_bin: u32,
    /// Sign of the car's offset along the road; 0 only at zero gap.
    pub sign: i8,
    pub region: Region,
    pub octant: u8,
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "g{}s{}r{}o{}",
            self.gap_bin,
            self.sign,
            self.region.code(),
            self.octant
        )
    }
}

/// Heading bin of `bins` equal arcs centred on multiples of `2*PI/bins`.
pub fn heading_bin(heading: f64, bins: u32) -> u32 {
    let width = 2.0 * PI / bins as f64;
    let a = heading.rem_euclid(2.0 * PI);
    ((a / width).round() as u32) % bins
}

pub fn q_state_key(obs: &Observation, grid: &ObservationGrid) -> StateKey {
    let rel = obs.car_relative.x;
    let bin = (rel.abs() / grid.gap_bin).floor();
    let gap_bin = (bin as u32).min(grid.gap_bins() - 1);
    let sign = if rel > 0.0 {
        1
    } else if rel < 0.0 {
        -1
    } else {
        0
    };
    StateKey {
        gap_bin,
        sign,
        region: obs.self_region,
        octant: heading_bin(obs.self_heading, 8) as u8,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_train_start: f64,
    pub epsilon_train_end: f64,
    pub epsilon_eval: f64,
    pub episodes: u32,
    pub grid: ObservationGrid,
    pub reward_interesting: f64,
    pub reward_road_step: f64,
    pub reward_turn: f64,
    pub reward_progress: f64,
    pub turn_epsilon: f64,
}

impl Default for QParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.95,
            epsilon_train_start: 0.2,
            epsilon_train_end: 0.02,
            epsilon_eval: 0.05,
            episodes: 2000,
            grid: ObservationGrid::default(),
            reward_interesting: 100.0,
            reward_road_step: -1.0,
            reward_turn: -2.0,
            reward_progress: 0.1,
            turn_epsilon: 0.1,
        }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SimError::Config(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(SimError::Config(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if !prob(self.epsilon_train_start)
            || !prob(self.epsilon_train_end)
            || !prob(self.epsilon_eval)
        {
            return Err(SimError::Config(
                "q-learning epsilons must lie in [0, 1]".into(),
            ));
        }
        if !(self.grid.gap_bin > 0.0) || !(self.grid.max_gap > 0.0) {
            return Err(SimError::Config(
                "q-learning gap grid must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Exploration rate for training episode `episode` of `episodes`.
    pub fn train_epsilon(&self, episode: u32, episodes: u32) -> f64 {
        if episodes <= 1 {
            return self.epsilon_train_start;
        }
        let t = episode as f64 / (episodes - 1) as f64;
        self.epsilon_train_start + (self.epsilon_train_end - self.epsilon_train_start) * t
    }
}

/// Q-values over motion actions; absent rows read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: BTreeMap<StateKey, [f64; N_MOVES]>,
    pub params: QParams,
}

impl QTable {
    pub fn new(params: QParams) -> Self {
        Self {
            values: BTreeMap::new(),
            params,
        }
    }

    pub fn get(&self, s: &StateKey, a: PedestrianAction) -> f64 {
        self.values.get(s).map_or(0.0, |row| row[move_index(a)])
    }

    pub fn set(&mut self, s: StateKey, a: PedestrianAction, v: f64) {
        self.values.entry(s).or_insert([0.0; N_MOVES])[move_index(a)] = v;
    }

    pub fn row(&self, s: &StateKey) -> [f64; N_MOVES] {
        self.values.get(s).copied().unwrap_or([0.0; N_MOVES])
    }

    pub fn max_value(&self, s: &StateKey) -> f64 {
        self.row(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One-step Q-learning update. `next = None` marks a terminal transition.
    pub fn update(&mut self, s: StateKey, a: PedestrianAction, r: f64, next: Option<&StateKey>) {
        let bootstrap = next.map_or(0.0, |n| self.max_value(n));
        let q = self.get(&s, a);
        let target = r + self.params.gamma * bootstrap;
        self.set(s, a, q + self.params.alpha * (target - q));
    }

    /// Greedy action, ties to the earliest motion action.
    pub fn greedy(&self, s: &StateKey) -> PedestrianAction {
        let row = self.row(s);
        let mut best = 0;
        for i in 1..N_MOVES {
            if row[i] > row[best] {
                best = i;
            }
        }
        PedestrianAction::MOVES[best]
    }

    /// One line per (state, action, value); values print in shortest
    /// round-trip form.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        out.push_str("# pedsim q-table v1\n");
        out.push_str(&format!(
            "# alpha={} gamma={} epsilon_eval={} gap_bin={} max_gap={}\n",
            p.alpha, p.gamma, p.epsilon_eval, p.grid.gap_bin, p.grid.max_gap
        ));
        for (s, row) in &self.values {
            for (a, v) in PedestrianAction::MOVES.iter().zip(row) {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    s.gap_bin,
                    s.sign,
                    s.region.code(),
                    s.octant,
                    a.name(),
                    v
                ));
            }
        }
        out
    }

    /// Parses [`QTable::to_text`] output. Hyperparameters come from `params`
    /// except those recorded in the header.
    pub fn from_text(text: &str, mut params: QParams) -> Result<Self> {
        let bad = |line: usize, msg: String| SimError::Parse {
            path: "<q-table>".into(),
            line,
            msg,
        };
        let mut table = QTable::new(params);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        let v: f64 = match v.parse() {
                            Ok(v) => v,
                            Err(_) => continue,
                        };
                        match k {
                            "alpha" => params.alpha = v,
                            "gamma" => params.gamma = v,
                            "epsilon_eval" => params.epsilon_eval = v,
                            "gap_bin" => params.grid.gap_bin = v,
                            "max_gap" => params.grid.max_gap = v,
                            _ => {}
                        }
                    }
                }
                table.params = params;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, format!("expected 6 fields, got {}", f.len())));
            }
            let region = Region::ALL
                .into_iter()
                .find(|r| f[2].len() == 1 && r.code() == f[2].chars().next().unwrap_or(' '))
                .ok_or_else(|| bad(i + 1, format!("bad region {:?}", f[2])))?;
            let key = StateKey {
                gap_bin: f[0].parse().map_err(|e| bad(i + 1, format!("{e}")))?,
                sign: f[1].parse().map_err(|e| bad(i + 1, format!("{e}")))?,
                region,
                octant: f[3].parse().map_err(|e| bad(i + 1, format!("{e}")))?,
            };
            let action: PedestrianAction = f[4].parse().map_err(|e| bad(i + 1, format!("{e}")))?;
            if action == PedestrianAction::StartCrossing {
                return Err(bad(i + 1, "START_CROSSING has no q-value".into()));
            }
            let v: f64 = f[5].parse().map_err(|e| bad(i + 1, format!("{e}")))?;
            table.set(key, action, v);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| SimError::io(path, e))
    }

    pub fn load(path: &Path, params: QParams) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_text(&text, params).map_err(|e| match e {
            SimError::Parse { line, msg, .. } => SimError::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }
}

fn move_index(a: PedestrianAction) -> usize {
    debug_assert!(a != PedestrianAction::StartCrossing);
    a.index().min(N_MOVES - 1)
}

/// Free-function form of [`QTable::update`].
pub fn q_update(q: &mut QTable, s: StateKey, a: PedestrianAction, r: f64, next: Option<&StateKey>) {
    q.update(s, a, r, next);
}

/// Epsilon-greedy selection over the motion actions.
pub fn q_select(q: &QTable, s: &StateKey, eps: f64, rng: &mut SimRng) -> PedestrianAction {
    if rng.gen::<f64>() < eps {
        PedestrianAction::MOVES[rng.gen_range(0..N_MOVES)]
    } else {
        q.greedy(s)
    }
}

/// Distance from `p` to the region of the car's lane beyond its stopping
/// distance, or `None` once that region has run off the road.
pub fn distance_to_precondition_zone(
    p: Vec2,
    car: &CarState,
    geometry: &RoadGeometry,
) -> Option<f64> {
    let x_lo = car.position.x + stopping_distance(car);
    if x_lo >= geometry.road_length {
        return None;
    }
    let (y_lo, y_hi) = geometry.car_lane();
    let nearest = Vec2::new(p.x.clamp(x_lo, geometry.road_length), p.y.clamp(y_lo, y_hi));
    Some(p.distance(nearest))
}

/// Shaping reward for one pedestrian's transition.
pub fn shaping_reward(
    params: &QParams,
    geometry: &RoadGeometry,
    before: (&PedestrianState, &CarState),
    after: (&PedestrianState, &CarState),
) -> f64 {
    let (p0, c0) = before;
    let (p1, c1) = after;
    let mut r = 0.0;
    if geometry.in_road(p1.position) {
        r += params.reward_road_step;
        if angle_diff(p0.heading, p1.heading).abs() > params.turn_epsilon {
            r += params.reward_turn;
        }
    }
    if let (Some(d0), Some(d1)) = (
        distance_to_precondition_zone(p0.position, c0, geometry),
        distance_to_precondition_zone(p1.position, c1, geometry),
    ) {
        r += params.reward_progress * (d0 - d1);
    }
    if in_precondition_zone(p1, c1, geometry) {
        r += params.reward_interesting;
    }
    r
}

/// Trains a table on single-pedestrian episodes with linearly decaying
/// exploration. Deterministic given `seed`.
pub fn q_train(world: &WorldConfig, episodes: u32, params: &QParams, seed: u64) -> Result<QTable> {
    if episodes == 0 {
        return Err(SimError::Contract(
            "q_train needs at least one episode".into(),
        ));
    }
    params.validate()?;
    world.validate()?;
    let geometry = &world.geometry;
    let mut table = QTable::new(*params);
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[crate::seeds::QTRAIN_STREAM]));
    for episode in 0..episodes {
        let eps = params.train_epsilon(episode, episodes);
        let mut spawn_rng = SimRng::seed_from_u64(derive_seed(seed, &[episode as u64]));
        let mut state = spawn_initial(&mut spawn_rng, 1, world)?;
        loop {
            let ped = state.pedestrians[0];
            let s = q_state_key(&observe(&ped, &state.car, geometry), &params.grid);
            let a = q_select(&table, &s, eps, &mut rng);
            let next = step(&state, &[(ped.id, a)], &world.kinematics, geometry)?;
            let ped1 = next.pedestrians[0];
            let r = shaping_reward(params, geometry, (&ped, &state.car), (&ped1, &next.car));
            let event = classify_test_event(&next, geometry, world.max_steps);
            if event == TestEvent::None {
                let s1 = q_state_key(&observe(&ped1, &next.car, geometry), &params.grid);
                table.update(s, a, r, Some(&s1));
                state = next;
            } else {
                table.update(s, a, r, None);
                break;
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::PedId;
    use approx::assert_relative_eq;

    fn obs_with(rel_x: f64, heading: f64) -> Observation {
        Observation {
            self_position: Vec2::new(50.0, 1.0),
            self_heading: heading,
            self_region: Region::PavementNear,
            car_relative: Vec2::new(rel_x, 2.8),
            car_speed: 10.0,
        }
    }

    fn key(gap_bin: u32) -> StateKey {
        StateKey {
            gap_bin,
            sign: -1,
            region: Region::PavementNear,
            octant: 0,
        }
    }

    #[test]
    fn state_key_bins() {
        let grid = ObservationGrid::default();
        assert_eq!(q_state_key(&obs_with(-40.0, 0.0), &grid).gap_bin, 4);
        let zero = q_state_key(&obs_with(0.0, 0.0), &grid);
        assert_eq!((zero.gap_bin, zero.sign), (0, 0));
        assert_eq!(
            q_state_key(&obs_with(-41.0, 0.01), &grid),
            q_state_key(&obs_with(-49.9, -0.01), &grid)
        );
        assert_eq!(
            q_state_key(&obs_with(-500.0, 0.0), &grid).gap_bin,
            grid.gap_bins() - 1
        );
        assert_eq!(q_state_key(&obs_with(-5.0, PI), &grid).octant, 4);
        assert_eq!(
            q_state_key(&obs_with(-5.0, -std::f64::consts::FRAC_PI_2), &grid).octant,
            6
        );
    }

    #[test]
    fn key_space_enumeration_matches_size() {
        let grid = ObservationGrid::default();
        let keys = grid.all_keys();
        assert_eq!(keys.len() as u64, grid.key_space_size());
        let unique: std::collections::BTreeSet<_> = keys.iter().collect();
        assert_eq!(unique.len(), keys.len());
    }

    #[test]
    fn update_hand_cases() {
        let params = QParams {
            alpha: 0.5,
            gamma: 0.9,
            ..QParams::default()
        };
        let mut q = QTable::new(params);
        q.update(key(1), PedestrianAction::Accel, 1.0, Some(&key(2)));
        assert_relative_eq!(q.get(&key(1), PedestrianAction::Accel), 0.5);

        let mut q = QTable::new(QParams {
            alpha: 1.0,
            gamma: 0.0,
            ..QParams::default()
        });
        q.set(key(1), PedestrianAction::Noop, 2.0);
        q_update(&mut q, key(1), PedestrianAction::Noop, 0.0, Some(&key(2)));
        assert_eq!(q.get(&key(1), PedestrianAction::Noop), 0.0);

        let mut q = QTable::new(QParams {
            gamma: 0.0,
            ..QParams::default()
        });
        q.update(key(3), PedestrianAction::Decel, 0.0, Some(&key(3)));
        assert_eq!(q.get(&key(3), PedestrianAction::Decel), 0.0);
    }

    #[test]
    fn update_touches_only_one_entry() {
        let mut q = QTable::new(QParams::default());
        for (i, a) in PedestrianAction::MOVES.iter().enumerate() {
            q.set(key(1), *a, i as f64);
            q.set(key(2), *a, -(i as f64));
        }
        let before = q.clone();
        q.update(key(1), PedestrianAction::TurnLeft, 5.0, Some(&key(2)));
        for s in [key(1), key(2)] {
            for a in PedestrianAction::MOVES {
                if (s, a) != (key(1), PedestrianAction::TurnLeft) {
                    assert_eq!(q.get(&s, a), before.get(&s, a));
                }
            }
        }
    }

    #[test]
    fn select_greedy_and_ties() {
        let mut q = QTable::new(QParams::default());
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(q_select(&q, &key(1), 0.0, &mut rng), PedestrianAction::Noop);
        q.set(key(1), PedestrianAction::Decel, 1.0);
        assert_eq!(
            q_select(&q, &key(1), 0.0, &mut rng),
            PedestrianAction::Decel
        );
    }

    #[test]
    fn select_uniform_when_exploring() {
        let q = QTable::new(QParams::default());
        let mut rng = SimRng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[q_select(&q, &key(0), 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.2).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut q = QTable::new(QParams::default());
        q.set(key(1), PedestrianAction::Accel, 0.1 + 0.2);
        q.set(
            StateKey {
                gap_bin: 9,
                sign: 1,
                region: Region::RoadLane2,
                octant: 7,
            },
            PedestrianAction::TurnRight,
            -3.5e-7,
        );
        let back = QTable::from_text(&q.to_text(), QParams::default()).unwrap();
        assert_eq!(back, q);
        assert!(QTable::from_text("1\t2\n", QParams::default()).is_err());
    }

    #[test]
    fn zone_distance() {
        let g = RoadGeometry::default();
        let car = CarState {
            position: Vec2::new(0.0, g.car_lane_center()),
            ..CarState::default()
        };
        let stop = stopping_distance(&car);
        let d = distance_to_precondition_zone(Vec2::new(stop + 10.0, 1.0), &car, &g).unwrap();
        assert_relative_eq!(d, 1.0);
        let far_car = CarState {
            position: Vec2::new(90.0, g.car_lane_center()),
            ..car
        };
        assert!(distance_to_precondition_zone(Vec2::new(95.0, 1.0), &far_car, &g).is_none());
    }

    #[test]
    fn training_rejects_zero_episodes_and_is_deterministic() {
        let w = WorldConfig::default();
        let p = QParams::default();
        assert!(matches!(q_train(&w, 0, &p, 1), Err(SimError::Contract(_))));
        let a = q_train(&w, 60, &p, 42).unwrap();
        let b = q_train(&w, 60, &p, 42).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn reward_pays_for_interesting_entry() {
        let g = RoadGeometry::default();
        let p = QParams::default();
        let car = CarState {
            position: Vec2::new(0.0, g.car_lane_center()),
            ..CarState::default()
        };
        let ped = |y| PedestrianState {
            id: PedId(0),
            position: Vec2::new(60.0, y),
            heading: std::f64::consts::FRAC_PI_2,
            speed: 2.5,
            crossing: None,
        };
        let r = shaping_reward(&p, &g, (&ped(1.9), &car), (&ped(2.15), &car));
        // road step, no turn, 0.1 m closer to the zone, zone entered.
        assert_relative_eq!(r, -1.0 + 0.1 * 0.1 + 100.0, epsilon = 1e-9);
    }
}
