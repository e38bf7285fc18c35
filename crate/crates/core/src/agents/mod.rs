//! Pedestrian decision policies.
//!
//! Each policy is a plain decision function; the [`Controller`] types wrap
//! them with the per-test latch state they need and decide for every
//! pedestrian of a test at once (the election needs the whole group).

mod controllers;
mod crossing;
mod proximity;
pub mod qlearning;
mod random;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::world::{CarState, PedestrianState, Region, RoadGeometry, Vec2};

pub use controllers::{
    build_controller, Controller, ElectionController, MpcController, ProximityController,
    QLearningController, RandomConstrainedController, RandomController,
};
pub use crossing::{apply_crossing_override, crossing_macro_step, CrossingOverride};
pub use proximity::{decide_proximity, proximity_trigger, run_election};
pub use qlearning::{q_select, q_state_key, q_train, ObservationGrid, QParams, QTable, StateKey};
pub use random::{decide_constrained_random, decide_random, fresh_draw, CrossingLatch};

pub type SimRng = rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PedestrianAction {
    Noop,
    Accel,
    Decel,
    TurnLeft,
    TurnRight,
    StartCrossing,
}

impl PedestrianAction {
    /// Motion actions, in tie-break order.
    pub const MOVES: [PedestrianAction; 5] = [
        PedestrianAction::Noop,
        PedestrianAction::Accel,
        PedestrianAction::Decel,
        PedestrianAction::TurnLeft,
        PedestrianAction::TurnRight,
    ];

    pub const ALL: [PedestrianAction; 6] = [
        PedestrianAction::Noop,
        PedestrianAction::Accel,
        PedestrianAction::Decel,
        PedestrianAction::TurnLeft,
        PedestrianAction::TurnRight,
        PedestrianAction::StartCrossing,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PedestrianAction::Noop => "NOOP",
            PedestrianAction::Accel => "ACCEL",
            PedestrianAction::Decel => "DECEL",
            PedestrianAction::TurnLeft => "TURN_LEFT",
            PedestrianAction::TurnRight => "TURN_RIGHT",
            PedestrianAction::StartCrossing => "START_CROSSING",
        }
    }
}

impl fmt::Display for PedestrianAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PedestrianAction {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown action {s:?}")))
    }
}

/// What a pedestrian perceives before deciding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub self_position: Vec2,
    pub self_heading: f64,
    pub self_region: Region,
    /// `car.position - self_position`.
    pub car_relative: Vec2,
    pub car_speed: f64,
}

impl Observation {
    pub fn car_position(&self) -> Vec2 {
        self.self_position + self.car_relative
    }
}

pub fn observe(ped: &PedestrianState, car: &CarState, geometry: &RoadGeometry) -> Observation {
    Observation {
        self_position: ped.position,
        self_heading: ped.heading,
        self_region: geometry.region(ped.position),
        car_relative: car.position - ped.position,
        car_speed: car.speed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Random,
    #[serde(rename = "constrained")]
    RandomConstrained,
    Proximity,
    Election,
    QLearning,
    Mpc,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Random,
        AgentKind::RandomConstrained,
        AgentKind::Proximity,
        AgentKind::Election,
        AgentKind::QLearning,
        AgentKind::Mpc,
    ];

    /// Stable index used for seed derivation.
    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::RandomConstrained => "constrained",
            AgentKind::Proximity => "proximity",
            AgentKind::Election => "election",
            AgentKind::QLearning => "qlearning",
            AgentKind::Mpc => "mpc",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "random_constrained" | "constrained_random" => "constrained",
            "q_learning" | "ql" => "qlearning",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| SimError::Config(format!("unknown agent kind {s:?}")))
    }
}

/// Per-kind tunables. `epsilon` means the fresh-draw rate for Random and the
/// per-step crossing probability for Random-Constrained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub epsilon: f64,
    pub distance_threshold: f64,
}

impl AgentConfig {
    pub fn new(kind: AgentKind, epsilon: f64, distance_threshold: f64) -> Result<Self> {
        let cfg = Self {
            kind,
            epsilon,
            distance_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SimError::Config(format!(
                "{}: epsilon {} outside [0, 1]",
                self.kind, self.epsilon
            )));
        }
        if matches!(self.kind, AgentKind::Proximity | AgentKind::Election)
            && !(self.distance_threshold > 0.0)
        {
            return Err(SimError::Config(format!(
                "{}: distance threshold must be positive",
                self.kind
            )));
        }
        Ok(())
    }
}
