use std::sync::Arc;

use super::{
    decide_constrained_random, decide_proximity, decide_random, observe, proximity_trigger,
    q_select, q_state_key, run_election, AgentConfig, AgentKind, CrossingLatch, PedestrianAction,
    QTable, SimRng,
};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::mpc::{self, MpcConfig};
use crate::world::{Kinematics, PedId, RoadGeometry, WorldState};

/// Decides one action for every pedestrian of a test, in pedestrian order.
/// A controller instance lives for exactly one test.
pub trait Controller: Send {
    fn decide(
        &mut self,
        world: &WorldState,
        rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>>;
}

pub struct RandomController {
    cfg: AgentConfig,
    last: Vec<PedestrianAction>,
}

impl RandomController {
    pub fn new(cfg: AgentConfig, n: usize) -> Self {
        Self {
            cfg,
            last: vec![PedestrianAction::Noop; n],
        }
    }
}

impl Controller for RandomController {
    fn decide(
        &mut self,
        world: &WorldState,
        rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        Ok(world
            .pedestrians
            .iter()
            .zip(self.last.iter_mut())
            .map(|(p, last)| {
                *last = decide_random(&self.cfg, *last, rng);
                (p.id, *last)
            })
            .collect())
    }
}

pub struct RandomConstrainedController {
    cfg: AgentConfig,
    latches: Vec<CrossingLatch>,
}

impl RandomConstrainedController {
    pub fn new(cfg: AgentConfig, n: usize) -> Self {
        Self {
            cfg,
            latches: vec![CrossingLatch::default(); n],
        }
    }
}

impl Controller for RandomConstrainedController {
    fn decide(
        &mut self,
        world: &WorldState,
        rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        Ok(world
            .pedestrians
            .iter()
            .zip(self.latches.iter_mut())
            .map(|(p, latch)| (p.id, decide_constrained_random(&self.cfg, p, latch, rng)))
            .collect())
    }
}

pub struct ProximityController {
    cfg: AgentConfig,
    geometry: RoadGeometry,
    latches: Vec<CrossingLatch>,
}

impl ProximityController {
    pub fn new(cfg: AgentConfig, geometry: RoadGeometry, n: usize) -> Self {
        Self {
            cfg,
            geometry,
            latches: vec![CrossingLatch::default(); n],
        }
    }
}

impl Controller for ProximityController {
    fn decide(
        &mut self,
        world: &WorldState,
        _rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        Ok(world
            .pedestrians
            .iter()
            .zip(self.latches.iter_mut())
            .map(|(p, latch)| {
                let obs = observe(p, &world.car, &self.geometry);
                (p.id, decide_proximity(&self.cfg, &obs, latch))
            })
            .collect())
    }
}

/// Proximity agents that vote: the first time any of them is triggered,
/// the triggered agent closest to the car wins and is the only one that
/// ever crosses in this test.
pub struct ElectionController {
    cfg: AgentConfig,
    geometry: RoadGeometry,
    winner: Option<PedId>,
}

impl ElectionController {
    pub fn new(cfg: AgentConfig, geometry: RoadGeometry) -> Self {
        Self {
            cfg,
            geometry,
            winner: None,
        }
    }

    pub fn winner(&self) -> Option<PedId> {
        self.winner
    }
}

impl Controller for ElectionController {
    fn decide(
        &mut self,
        world: &WorldState,
        _rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        let mut actions: Vec<(PedId, PedestrianAction)> = world
            .pedestrians
            .iter()
            .map(|p| (p.id, PedestrianAction::Noop))
            .collect();
        if self.winner.is_some() {
            return Ok(actions);
        }
        let candidates: Vec<(PedId, f64)> = world
            .pedestrians
            .iter()
            .filter_map(|p| {
                let obs = observe(p, &world.car, &self.geometry);
                proximity_trigger(
                    obs.self_position,
                    obs.car_position(),
                    self.cfg.distance_threshold,
                )
                .then(|| (p.id, obs.car_relative.norm()))
            })
            .collect();
        if !candidates.is_empty() {
            let winner = run_election(&candidates)?;
            self.winner = Some(winner);
            for (id, a) in actions.iter_mut() {
                if *id == winner {
                    *a = PedestrianAction::StartCrossing;
                }
            }
        }
        Ok(actions)
    }
}

pub struct QLearningController {
    table: Arc<QTable>,
    geometry: RoadGeometry,
    epsilon: f64,
}

impl QLearningController {
    pub fn new(table: Arc<QTable>, geometry: RoadGeometry) -> Self {
        let epsilon = table.params.epsilon_eval;
        Self {
            table,
            geometry,
            epsilon,
        }
    }
}

impl Controller for QLearningController {
    fn decide(
        &mut self,
        world: &WorldState,
        rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        let grid = self.table.params.grid;
        Ok(world
            .pedestrians
            .iter()
            .map(|p| {
                let key = q_state_key(&observe(p, &world.car, &self.geometry), &grid);
                (p.id, q_select(&self.table, &key, self.epsilon, rng))
            })
            .collect())
    }
}

pub struct MpcController {
    cfg: MpcConfig,
    kin: Kinematics,
    geometry: RoadGeometry,
}

impl MpcController {
    pub fn new(cfg: MpcConfig, kin: Kinematics, geometry: RoadGeometry) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, kin, geometry })
    }
}

impl Controller for MpcController {
    fn decide(
        &mut self,
        world: &WorldState,
        _rng: &mut SimRng,
    ) -> Result<Vec<(PedId, PedestrianAction)>> {
        world
            .pedestrians
            .iter()
            .map(|p| {
                Ok((
                    p.id,
                    mpc::plan(p, &world.car, &self.cfg, &self.kin, &self.geometry)?,
                ))
            })
            .collect()
    }
}

/// Fresh controller for one test of `n` pedestrians.
pub fn build_controller(
    kind: AgentKind,
    cfg: &SimConfig,
    qtable: Option<&Arc<QTable>>,
    n: usize,
) -> Result<Box<dyn Controller>> {
    let geometry = cfg.world.geometry;
    Ok(match kind {
        AgentKind::Random => Box::new(RandomController::new(cfg.random, n)),
        AgentKind::RandomConstrained => {
            Box::new(RandomConstrainedController::new(cfg.constrained, n))
        }
        AgentKind::Proximity => Box::new(ProximityController::new(cfg.proximity, geometry, n)),
        AgentKind::Election => Box::new(ElectionController::new(cfg.election, geometry)),
        AgentKind::QLearning => {
            let table = qtable.ok_or_else(|| {
                SimError::Contract("q-learning agents need a trained table".into())
            })?;
            Box::new(QLearningController::new(Arc::clone(table), geometry))
        }
        AgentKind::Mpc => Box::new(MpcController::new(cfg.mpc, cfg.world.kinematics, geometry)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{PedestrianState, Vec2, WorldConfig};
    use rand::SeedableRng;

    fn two_ped_world(xs: [f64; 2]) -> WorldState {
        let cfg = WorldConfig::default();
        WorldState {
            car: cfg.initial_car(),
            pedestrians: xs
                .iter()
                .enumerate()
                .map(|(i, &x)| PedestrianState {
                    id: PedId(i as u32),
                    position: Vec2::new(x, 1.0),
                    heading: 0.0,
                    speed: 0.0,
                    crossing: None,
                })
                .collect(),
            step_index: 0,
            dt: cfg.dt,
        }
    }

    #[test]
    fn election_picks_one_winner_for_the_whole_test() {
        let cfg = AgentConfig::new(AgentKind::Election, 0.0, 100.0).unwrap();
        let mut c = ElectionController::new(cfg, RoadGeometry::default());
        let mut rng = SimRng::seed_from_u64(0);
        let w = two_ped_world([40.0, 30.0]);
        let first = c.decide(&w, &mut rng).unwrap();
        assert_eq!(first[1], (PedId(1), PedestrianAction::StartCrossing));
        assert_eq!(first[0], (PedId(0), PedestrianAction::Noop));
        for _ in 0..10 {
            assert!(c
                .decide(&w, &mut rng)
                .unwrap()
                .iter()
                .all(|(_, a)| *a == PedestrianAction::Noop));
        }
        assert_eq!(c.winner(), Some(PedId(1)));
    }

    #[test]
    fn q_learning_requires_table() {
        let cfg = SimConfig::default();
        assert!(build_controller(AgentKind::QLearning, &cfg, None, 1).is_err());
        assert!(build_controller(AgentKind::Mpc, &cfg, None, 1).is_ok());
    }
}
