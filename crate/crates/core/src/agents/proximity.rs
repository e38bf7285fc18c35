use super::{AgentConfig, CrossingLatch, Observation, PedestrianAction};
use crate::error::{Result, SimError};
use crate::world::{PedId, Vec2};

/// Euclidean distance to the car strictly below `d`.
pub fn proximity_trigger(ped_position: Vec2, car_position: Vec2, d: f64) -> bool {
    ped_position.distance(car_position) < d
}

/// Starts crossing the first time the car comes within the threshold.
pub fn decide_proximity(
    cfg: &AgentConfig,
    obs: &Observation,
    latch: &mut CrossingLatch,
) -> PedestrianAction {
    if latch.fired {
        return PedestrianAction::Noop;
    }
    if proximity_trigger(
        obs.self_position,
        obs.car_position(),
        cfg.distance_threshold,
    ) && latch.fire()
    {
        PedestrianAction::StartCrossing
    } else {
        PedestrianAction::Noop
    }
}

/// Picks the candidate closest to the car; lowest id wins ties.
pub fn run_election(candidates: &[(PedId, f64)]) -> Result<PedId> {
    candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(id, _)| *id)
        .ok_or_else(|| SimError::Contract("election needs at least one candidate".into()))
}
