//! Receding-horizon planner for the MPC pedestrian.
//!
//! The objective trades off three terms over the horizon: distance between
//! pedestrian and car, time spent on the road, and the number of heading
//! changes larger than `turn_epsilon`. Integrals are left Riemann sums over
//! the planning timestep. The search enumerates every action sequence
//! depth-first in lexicographic order and keeps the first strict minimum,
//! pruning prefixes whose partial cost already reaches the incumbent (every
//! term is nonnegative, so partial costs never decrease).

use serde::{Deserialize, Serialize};

use crate::agents::PedestrianAction;
use crate::error::{Result, SimError};
use crate::world::{
    advance_pedestrian, angle_diff, CarState, Kinematics, PedestrianState, RoadGeometry, Vec2,
};

const ACTIONS: [PedestrianAction; 5] = PedestrianAction::MOVES;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    pub distance: f64,
    pub road: f64,
    pub turn: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self {
            distance: 1.0,
            road: 0.02,
            turn: 0.25,
        }
    }
}

impl MpcWeights {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            distance: self.distance * k,
            road: self.road * k,
            turn: self.turn * k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    /// Planning timestep. Longer than the simulation step so that four
    /// planning steps see the car arrive.
    pub dt: f64,
    pub turn_epsilon: f64,
    pub weights: MpcWeights,
    /// Upper bound on enumerated sequences per decision.
    pub max_sequences: u64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 4,
            dt: 1.5,
            turn_epsilon: 0.1,
            weights: MpcWeights::default(),
            max_sequences: 1_000_000,
        }
    }
}

impl MpcConfig {
    pub fn sequence_count(&self) -> Option<u64> {
        (ACTIONS.len() as u64).checked_pow(u32::try_from(self.horizon_steps).ok()?)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(w.distance) || !ok(w.road) || !ok(w.turn) {
            return Err(SimError::Config(format!(
                "mpc weights must be nonnegative: {w:?}"
            )));
        }
        if w.distance == 0.0 && w.road == 0.0 && w.turn == 0.0 {
            return Err(SimError::Config(
                "at least one mpc weight must be positive".into(),
            ));
        }
        if self.horizon_steps == 0 {
            return Err(SimError::Config(
                "mpc horizon must be at least one step".into(),
            ));
        }
        if !(self.dt > 0.0) || !(self.turn_epsilon > 0.0) {
            return Err(SimError::Config(
                "mpc dt and turn_epsilon must be positive".into(),
            ));
        }
        match self.sequence_count() {
            Some(n) if n <= self.max_sequences => Ok(()),
            _ => Err(SimError::Config(format!(
                "horizon {} enumerates more than {} sequences",
                self.horizon_steps, self.max_sequences
            ))),
        }
    }

    fn combine(&self, distance_sum: f64, road_steps: u32, turns: u32) -> f64 {
        let w = &self.weights;
        w.distance * distance_sum * self.dt
            + w.road * road_steps as f64 * self.dt
            + w.turn * turns as f64
    }
}

/// An action sequence and the states it produces, `P_1..P_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateTrajectory {
    pub actions: Vec<PedestrianAction>,
    pub positions: Vec<Vec2>,
    pub headings: Vec<f64>,
}

impl CandidateTrajectory {
    /// Forward-simulates `actions` from `ped` with the simulator kinematics.
    pub fn simulate(
        ped: &PedestrianState,
        actions: &[PedestrianAction],
        kin: &Kinematics,
        road: &RoadGeometry,
        dt: f64,
    ) -> Self {
        let mut state = *ped;
        let mut positions = Vec::with_capacity(actions.len());
        let mut headings = Vec::with_capacity(actions.len());
        for &a in actions {
            state = advance_pedestrian(&state, a, kin, road, dt);
            positions.push(state.position);
            headings.push(state.heading);
        }
        Self {
            actions: actions.to_vec(),
            positions,
            headings,
        }
    }
}

/// Constant-velocity car positions `C_1..C_N`.
pub fn predict_car(car: &CarState, horizon_steps: usize, dt: f64) -> Vec<Vec2> {
    let dir = Vec2::from_heading(car.heading);
    (1..=horizon_steps)
        .map(|i| car.position + dir * (i as f64 * dt * car.speed))
        .collect()
}

fn is_turn(from: f64, to: f64, eps: f64) -> bool {
    angle_diff(from, to).abs() > eps
}

pub fn trajectory_cost(
    cand: &CandidateTrajectory,
    car_pred: &[Vec2],
    cfg: &MpcConfig,
    road: &RoadGeometry,
) -> Result<f64> {
    let n = cand.positions.len();
    if car_pred.len() != n || cand.headings.len() != n {
        return Err(SimError::Contract(format!(
            "trajectory has {} positions and {} headings but car prediction has {}",
            n,
            cand.headings.len(),
            car_pred.len()
        )));
    }
    let mut distance_sum = 0.0;
    let mut road_steps = 0u32;
    for (p, c) in cand.positions.iter().zip(car_pred) {
        distance_sum += p.distance(*c);
        if road.in_road(*p) {
            road_steps += 1;
        }
    }
    let turns = cand
        .headings
        .windows(2)
        .filter(|w| is_turn(w[0], w[1], cfg.turn_epsilon))
        .count() as u32;
    Ok(cfg.combine(distance_sum, road_steps, turns))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub actions: Vec<PedestrianAction>,
    pub cost: f64,
    /// Complete sequences scored (the rest were pruned).
    pub evaluated: u64,
}

struct Search<'a> {
    cfg: &'a MpcConfig,
    kin: &'a Kinematics,
    road: &'a RoadGeometry,
    car_pred: Vec<Vec2>,
    prefix: Vec<PedestrianAction>,
    best: Option<(f64, Vec<PedestrianAction>)>,
    evaluated: u64,
}

impl Search<'_> {
    fn descend(
        &mut self,
        state: &PedestrianState,
        depth: usize,
        distance_sum: f64,
        road_steps: u32,
        turns: u32,
    ) {
        let n = self.cfg.horizon_steps;
        for &a in &ACTIONS {
            let next = advance_pedestrian(state, a, self.kin, self.road, self.cfg.dt);
            let d = distance_sum + next.position.distance(self.car_pred[depth]);
            let r = road_steps + u32::from(self.road.in_road(next.position));
            let t = turns
                + u32::from(
                    depth > 0 && is_turn(state.heading, next.heading, self.cfg.turn_epsilon),
                );
            let partial = self.cfg.combine(d, r, t);
            if let Some((best, _)) = &self.best {
                if partial >= *best {
                    continue;
                }
            }
            self.prefix.push(a);
            if depth + 1 == n {
                self.evaluated += 1;
                self.best = Some((partial, self.prefix.clone()));
            } else {
                self.descend(&next, depth + 1, d, r, t);
            }
            self.prefix.pop();
        }
    }
}

/// Finds the minimum-cost action sequence over the horizon.
pub fn plan_sequence(
    ped: &PedestrianState,
    car: &CarState,
    cfg: &MpcConfig,
    kin: &Kinematics,
    road: &RoadGeometry,
) -> Result<Plan> {
    cfg.validate()?;
    let mut search = Search {
        cfg,
        kin,
        road,
        car_pred: predict_car(car, cfg.horizon_steps, cfg.dt),
        prefix: Vec::with_capacity(cfg.horizon_steps),
        best: None,
        evaluated: 0,
    };
    search.descend(ped, 0, 0.0, 0, 0);
    let (cost, actions) = search
        .best
        .ok_or_else(|| SimError::Contract("planner found no finite-cost sequence".into()))?;
    Ok(Plan {
        actions,
        cost,
        evaluated: search.evaluated,
    })
}

/// First action of the optimal sequence; the caller re-plans every step.
pub fn plan(
    ped: &PedestrianState,
    car: &CarState,
    cfg: &MpcConfig,
    kin: &Kinematics,
    road: &RoadGeometry,
) -> Result<PedestrianAction> {
    Ok(plan_sequence(ped, car, cfg, kin, road)?.actions[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::PedId;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn traj(positions: Vec<Vec2>, headings: Vec<f64>) -> CandidateTrajectory {
        CandidateTrajectory {
            actions: vec![PedestrianAction::Noop; positions.len()],
            positions,
            headings,
        }
    }

    fn cfg_with(weights: MpcWeights, dt: f64) -> MpcConfig {
        MpcConfig {
            dt,
            weights,
            ..MpcConfig::default()
        }
    }

    fn ped(x: f64, y: f64) -> PedestrianState {
        PedestrianState {
            id: PedId(0),
            position: Vec2::new(x, y),
            heading: 0.0,
            speed: 0.0,
            crossing: None,
        }
    }

    #[test]
    fn predict_car_cases() {
        let mut car = CarState {
            speed: 0.0,
            position: Vec2::new(3.0, 4.0),
            ..CarState::default()
        };
        assert!(predict_car(&car, 5, 0.1).iter().all(|c| *c == car.position));
        car.speed = 10.0;
        let xs: Vec<f64> = predict_car(&car, 3, 0.1)
            .iter()
            .map(|c| c.x - 3.0)
            .collect();
        for (x, want) in xs.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*x, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn cost_distance_term() {
        let road = RoadGeometry::default();
        let cfg = cfg_with(
            MpcWeights {
                distance: 1.0,
                road: 0.0,
                turn: 0.0,
            },
            1.0,
        );
        let t = traj(vec![Vec2::new(0.0, 3.0); 2], vec![0.0; 2]);
        let c =
            trajectory_cost(&t, &[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)], &cfg, &road).unwrap();
        assert_relative_eq!(c, 3.0 + 10f64.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(c, 6.1623, epsilon = 1e-4);
    }

    #[test]
    fn cost_road_term() {
        let road = RoadGeometry::default();
        let cfg = cfg_with(
            MpcWeights {
                distance: 0.0,
                road: 1.0,
                turn: 0.0,
            },
            0.1,
        );
        let ys = [1.0, 3.0, 4.0, 6.0, 7.0, 9.0, 10.0, 0.5];
        let positions: Vec<Vec2> = ys.iter().map(|&y| Vec2::new(10.0, y)).collect();
        assert_eq!(positions.iter().filter(|p| road.in_road(**p)).count(), 5);
        let c = trajectory_cost(
            &traj(positions, vec![0.0; 8]),
            &[Vec2::default(); 8],
            &cfg,
            &road,
        )
        .unwrap();
        assert_relative_eq!(c, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn cost_turn_term() {
        let road = RoadGeometry::default();
        let cfg = MpcConfig {
            turn_epsilon: 0.1,
            ..cfg_with(
                MpcWeights {
                    distance: 0.0,
                    road: 0.0,
                    turn: 2.0,
                },
                0.1,
            )
        };
        let headings = vec![0.0, 0.0, FRAC_PI_2, FRAC_PI_2, PI];
        let t = traj(vec![Vec2::new(10.0, 0.5); 5], headings);
        let c = trajectory_cost(&t, &[Vec2::default(); 5], &cfg, &road).unwrap();
        assert_relative_eq!(c, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn turn_term_wraps_the_seam() {
        let road = RoadGeometry::default();
        let cfg = cfg_with(
            MpcWeights {
                distance: 0.0,
                road: 0.0,
                turn: 1.0,
            },
            0.1,
        );
        let t = traj(vec![Vec2::new(10.0, 0.5); 2], vec![PI - 0.01, -PI + 0.01]);
        assert_eq!(
            trajectory_cost(&t, &[Vec2::default(); 2], &cfg, &road).unwrap(),
            0.0
        );
    }

    #[test]
    fn cost_rejects_length_mismatch() {
        let road = RoadGeometry::default();
        let t = traj(vec![Vec2::default(); 3], vec![0.0; 3]);
        assert!(matches!(
            trajectory_cost(&t, &[Vec2::default(); 2], &MpcConfig::default(), &road),
            Err(SimError::Contract(_))
        ));
    }

    #[test]
    fn config_validation() {
        let zero = MpcConfig {
            weights: MpcWeights {
                distance: 0.0,
                road: 0.0,
                turn: 0.0,
            },
            ..MpcConfig::default()
        };
        assert!(zero.validate().is_err());
        let huge = MpcConfig {
            horizon_steps: 9,
            ..MpcConfig::default()
        };
        assert!(huge.validate().is_err());
        let ok = MpcConfig {
            horizon_steps: 8,
            ..MpcConfig::default()
        };
        assert!(ok.validate().is_ok());
        assert!(plan(
            &ped(1.0, 1.0),
            &CarState::default(),
            &huge,
            &Kinematics::default(),
            &RoadGeometry::default()
        )
        .is_err());
    }

    #[test]
    fn one_step_horizon_is_greedy_argmin() {
        let road = RoadGeometry::default();
        let kin = Kinematics::default();
        let cfg = MpcConfig {
            horizon_steps: 1,
            ..MpcConfig::default()
        };
        let mut p = ped(40.0, 1.0);
        p.speed = 1.0;
        p.heading = 2.0;
        let car = CarState {
            position: Vec2::new(20.0, road.car_lane_center()),
            ..CarState::default()
        };
        let pred = predict_car(&car, 1, cfg.dt);
        let mut best = (f64::INFINITY, PedestrianAction::Noop);
        for a in ACTIONS {
            let c = trajectory_cost(
                &CandidateTrajectory::simulate(&p, &[a], &kin, &road, cfg.dt),
                &pred,
                &cfg,
                &road,
            )
            .unwrap();
            if c < best.0 {
                best = (c, a);
            }
        }
        assert_eq!(plan(&p, &car, &cfg, &kin, &road).unwrap(), best.1);
    }

    #[test]
    fn distance_weight_moves_towards_car() {
        let road = RoadGeometry::default();
        let kin = Kinematics::default();
        let cfg = MpcConfig {
            weights: MpcWeights {
                distance: 1.0,
                road: 0.0,
                turn: 0.0,
            },
            ..MpcConfig::default()
        };
        let mut p = ped(30.0, 1.0);
        p.speed = 2.0;
        p.heading = 0.0; // walking away from the car
        let car = CarState {
            position: Vec2::new(10.0, road.car_lane_center()),
            speed: 0.0,
            ..CarState::default()
        };
        let one_step = |a| {
            advance_pedestrian(&p, a, &kin, &road, cfg.dt)
                .position
                .distance(car.position)
        };
        let noop = one_step(PedestrianAction::Noop);
        let can_improve = ACTIONS.iter().any(|&a| one_step(a) < noop);
        assert!(can_improve);
        let chosen = plan(&p, &car, &cfg, &kin, &road).unwrap();
        assert!(one_step(chosen) < noop, "{chosen:?}");
    }
}
