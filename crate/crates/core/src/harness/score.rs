use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::world::{angle_diff, PedestrianState, RoadGeometry};

use super::trace::Trace;

/// Realism score weights: penalties for turning and lingering on the road,
/// a bonus for an interesting test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub turn_penalty: f64,
    pub road_penalty: f64,
    pub interesting_bonus: f64,
    pub turn_epsilon: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            turn_penalty: 10.0,
            road_penalty: 1.0,
            interesting_bonus: 50.0,
            turn_epsilon: 0.1,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.turn_penalty, self.road_penalty, self.interesting_bonus]
            .iter()
            .all(|v| v.is_finite());
        if !ok || !(self.turn_epsilon >= 0.0) {
            return Err(SimError::Config(format!("invalid score weights: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreBreakdown {
    pub road_turns: u64,
    pub road_steps: u64,
    pub interesting: bool,
}

impl ScoreBreakdown {
    /// Adds the transition `before -> after` (pedestrians in the same order).
    pub fn add_transition(
        &mut self,
        before: &[PedestrianState],
        after: &[PedestrianState],
        geometry: &RoadGeometry,
        weights: &ScoreWeights,
    ) {
        for (p0, p1) in before.iter().zip(after) {
            if geometry.in_road(p1.position) {
                self.road_steps += 1;
                if angle_diff(p0.heading, p1.heading).abs() > weights.turn_epsilon {
                    self.road_turns += 1;
                }
            }
        }
    }

    pub fn score(&self, w: &ScoreWeights) -> f64 {
        let bonus = if self.interesting {
            w.interesting_bonus
        } else {
            0.0
        };
        -w.turn_penalty * self.road_turns as f64 - w.road_penalty * self.road_steps as f64 + bonus
    }
}

pub fn score_breakdown(
    trace: &Trace,
    weights: &ScoreWeights,
    geometry: &RoadGeometry,
) -> ScoreBreakdown {
    let mut b = ScoreBreakdown {
        interesting: trace.final_event() == crate::world::TestEvent::InterestingIntrusion,
        ..Default::default()
    };
    for w in trace.steps.windows(2) {
        b.add_transition(&w[0].pedestrians, &w[1].pedestrians, geometry, weights);
    }
    b
}

pub fn score_test(trace: &Trace, weights: &ScoreWeights, geometry: &RoadGeometry) -> f64 {
    score_breakdown(trace, weights, geometry).score(weights)
}
