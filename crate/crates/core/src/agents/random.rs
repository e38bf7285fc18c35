use rand::Rng;

use super::{AgentConfig, PedestrianAction, SimRng};
use crate::world::PedestrianState;

/// Remembers whether a pedestrian has already started its one crossing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CrossingLatch {
    pub fired: bool,
}

impl CrossingLatch {
    /// Returns true the first time only.
    pub fn fire(&mut self) -> bool {
        !std::mem::replace(&mut self.fired, true)
    }
}

/// With probability `epsilon` a uniform draw over the motion actions.
pub fn fresh_draw(epsilon: f64, rng: &mut SimRng) -> Option<PedestrianAction> {
    if rng.gen::<f64>() < epsilon {
        let i = rng.gen_range(0..PedestrianAction::MOVES.len());
        Some(PedestrianAction::MOVES[i])
    } else {
        None
    }
}

/// Random policy: redraw with probability epsilon, else repeat `last`.
pub fn decide_random(
    cfg: &AgentConfig,
    last: PedestrianAction,
    rng: &mut SimRng,
) -> PedestrianAction {
    fresh_draw(cfg.epsilon, rng).unwrap_or(last)
}

/// Random-Constrained policy: each step, start crossing with probability
/// epsilon. Once a crossing has been started the scripted macro drives.
pub fn decide_constrained_random(
    cfg: &AgentConfig,
    state: &PedestrianState,
    latch: &mut CrossingLatch,
    rng: &mut SimRng,
) -> PedestrianAction {
    if latch.fired || state.crossing_flag() {
        return PedestrianAction::Noop;
    }
    let x: f64 = rng.gen();
    if x < cfg.epsilon && latch.fire() {
        PedestrianAction::StartCrossing
    } else {
        PedestrianAction::Noop
    }
}
