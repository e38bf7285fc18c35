//! Flat `section.key = value` configuration files.

use std::path::Path;
use std::str::FromStr;

use crate::agents::{AgentConfig, AgentKind, QParams};
use crate::coverage::DiscretizationGrid;
use crate::error::{Result, SimError};
use crate::harness::ScoreWeights;
use crate::mpc::MpcConfig;
use crate::world::WorldConfig;

/// Every model parameter used by a simulation cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub random: AgentConfig,
    pub constrained: AgentConfig,
    pub proximity: AgentConfig,
    pub election: AgentConfig,
    pub qlearning: QParams,
    pub mpc: MpcConfig,
    pub coverage: DiscretizationGrid,
    pub score: ScoreWeights,
}

impl Default for SimConfig {
    fn default() -> Self {
        let agent = |kind, epsilon, distance_threshold| AgentConfig {
            kind,
            epsilon,
            distance_threshold,
        };
        Self {
            world: WorldConfig::default(),
            random: agent(AgentKind::Random, 0.1, 0.0),
            constrained: agent(AgentKind::RandomConstrained, 0.003, 0.0),
            proximity: agent(AgentKind::Proximity, 0.0, 25.0),
            election: agent(AgentKind::Election, 0.0, 25.0),
            qlearning: QParams::default(),
            mpc: MpcConfig::default(),
            coverage: DiscretizationGrid::default(),
            score: ScoreWeights::default(),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| SimError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        for a in [
            &self.random,
            &self.constrained,
            &self.proximity,
            &self.election,
        ] {
            a.validate()?;
        }
        self.qlearning.validate()?;
        self.mpc.validate()?;
        self.coverage_grid().validate()?;
        self.score.validate()
    }

    /// Coverage grid sized to this world.
    pub fn coverage_grid(&self) -> DiscretizationGrid {
        DiscretizationGrid {
            road_length: self.world.geometry.road_length,
            v_max: self.world.kinematics.v_max,
            ..self.coverage
        }
    }

    /// Sets one parameter. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let w = &mut self.world;
        let q = &mut self.qlearning;
        let m = &mut self.mpc;
        match key {
            "world.road_length" => w.geometry.road_length = num(key, value)?,
            "world.lane_width" => w.geometry.lane_width = num(key, value)?,
            "world.pavement_width" => w.geometry.pavement_width = num(key, value)?,
            "world.lane_count" => w.geometry.lane_count = num(key, value)?,
            "world.car_speed" => w.car.speed = num(key, value)?,
            "world.car_max_decel" => w.car.max_decel = num(key, value)?,
            "world.car_reaction_time" => w.car.reaction_time = num(key, value)?,
            "world.v_max" => w.kinematics.v_max = num(key, value)?,
            "world.delta_v" => w.kinematics.delta_v = num(key, value)?,
            "world.delta_theta" => w.kinematics.delta_theta = num(key, value)?,
            "world.dt" => w.dt = num(key, value)?,
            "world.max_steps" => w.max_steps = num(key, value)?,
            "world.spawn_margin" => w.spawn_margin = num(key, value)?,
            "world.min_separation" => w.min_separation = num(key, value)?,
            "world.max_pedestrians" => w.max_pedestrians = num(key, value)?,
            "random.epsilon" => self.random.epsilon = num(key, value)?,
            "constrained.epsilon" => self.constrained.epsilon = num(key, value)?,
            "proximity.distance_threshold" => self.proximity.distance_threshold = num(key, value)?,
            "election.distance_threshold" => self.election.distance_threshold = num(key, value)?,
            "qlearning.alpha" => q.alpha = num(key, value)?,
            "qlearning.gamma" => q.gamma = num(key, value)?,
            "qlearning.epsilon_train_start" => q.epsilon_train_start = num(key, value)?,
            "qlearning.epsilon_train_end" => q.epsilon_train_end = num(key, value)?,
            "qlearning.epsilon_eval" => q.epsilon_eval = num(key, value)?,
            "qlearning.episodes" => q.episodes = num(key, value)?,
            "qlearning.gap_bin" => q.grid.gap_bin = num(key, value)?,
            "qlearning.max_gap" => q.grid.max_gap = num(key, value)?,
            "qlearning.reward_interesting" => q.reward_interesting = num(key, value)?,
            "qlearning.reward_road_step" => q.reward_road_step = num(key, value)?,
            "qlearning.reward_turn" => q.reward_turn = num(key, value)?,
            "qlearning.reward_progress" => q.reward_progress = num(key, value)?,
            "qlearning.turn_epsilon" => q.turn_epsilon = num(key, value)?,
            "mpc.horizon_steps" => m.horizon_steps = num(key, value)?,
            "mpc.dt" => m.dt = num(key, value)?,
            "mpc.turn_epsilon" => m.turn_epsilon = num(key, value)?,
            "mpc.w_distance" => m.weights.distance = num(key, value)?,
            "mpc.w_road" => m.weights.road = num(key, value)?,
            "mpc.w_turn" => m.weights.turn = num(key, value)?,
            "mpc.max_sequences" => m.max_sequences = num(key, value)?,
            "coverage.x_bin" => self.coverage.x_bin = num(key, value)?,
            "coverage.heading_bins" => self.coverage.heading_bins = num(key, value)?,
            "coverage.speed_bins" => self.coverage.speed_bins = num(key, value)?,
            "coverage.obs_gap_bin" => self.coverage.observation.gap_bin = num(key, value)?,
            "coverage.obs_max_gap" => self.coverage.observation.max_gap = num(key, value)?,
            "score.turn_penalty" => self.score.turn_penalty = num(key, value)?,
            "score.road_penalty" => self.score.road_penalty = num(key, value)?,
            "score.interesting_bonus" => self.score.interesting_bonus = num(key, value)?,
            "score.turn_epsilon" => self.score.turn_epsilon = num(key, value)?,
            _ => return Err(SimError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// All parameters as `(key, value)` pairs accepted by [`SimConfig::set`].
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let w = &self.world;
        let q = &self.qlearning;
        let m = &self.mpc;
        vec![
            ("world.road_length", w.geometry.road_length.to_string()),
            ("world.lane_width", w.geometry.lane_width.to_string()),
            (
                "world.pavement_width",
                w.geometry.pavement_width.to_string(),
            ),
            ("world.lane_count", w.geometry.lane_count.to_string()),
            ("world.car_speed", w.car.speed.to_string()),
            ("world.car_max_decel", w.car.max_decel.to_string()),
            ("world.car_reaction_time", w.car.reaction_time.to_string()),
            ("world.v_max", w.kinematics.v_max.to_string()),
            ("world.delta_v", w.kinematics.delta_v.to_string()),
            ("world.delta_theta", w.kinematics.delta_theta.to_string()),
            ("world.dt", w.dt.to_string()),
            ("world.max_steps", w.max_steps.to_string()),
            ("world.spawn_margin", w.spawn_margin.to_string()),
            ("world.min_separation", w.min_separation.to_string()),
            ("world.max_pedestrians", w.max_pedestrians.to_string()),
            ("random.epsilon", self.random.epsilon.to_string()),
            ("constrained.epsilon", self.constrained.epsilon.to_string()),
            (
                "proximity.distance_threshold",
                self.proximity.distance_threshold.to_string(),
            ),
            (
                "election.distance_threshold",
                self.election.distance_threshold.to_string(),
            ),
            ("qlearning.alpha", q.alpha.to_string()),
            ("qlearning.gamma", q.gamma.to_string()),
            (
                "qlearning.epsilon_train_start",
                q.epsilon_train_start.to_string(),
            ),
            (
                "qlearning.epsilon_train_end",
                q.epsilon_train_end.to_string(),
            ),
            ("qlearning.epsilon_eval", q.epsilon_eval.to_string()),
            ("qlearning.episodes", q.episodes.to_string()),
            ("qlearning.gap_bin", q.grid.gap_bin.to_string()),
            ("qlearning.max_gap", q.grid.max_gap.to_string()),
            (
                "qlearning.reward_interesting",
                q.reward_interesting.to_string(),
            ),
            ("qlearning.reward_road_step", q.reward_road_step.to_string()),
            ("qlearning.reward_turn", q.reward_turn.to_string()),
            ("qlearning.reward_progress", q.reward_progress.to_string()),
            ("qlearning.turn_epsilon", q.turn_epsilon.to_string()),
            ("mpc.horizon_steps", m.horizon_steps.to_string()),
            ("mpc.dt", m.dt.to_string()),
            ("mpc.turn_epsilon", m.turn_epsilon.to_string()),
            ("mpc.w_distance", m.weights.distance.to_string()),
            ("mpc.w_road", m.weights.road.to_string()),
            ("mpc.w_turn", m.weights.turn.to_string()),
            ("mpc.max_sequences", m.max_sequences.to_string()),
            ("coverage.x_bin", self.coverage.x_bin.to_string()),
            (
                "coverage.heading_bins",
                self.coverage.heading_bins.to_string(),
            ),
            ("coverage.speed_bins", self.coverage.speed_bins.to_string()),
            (
                "coverage.obs_gap_bin",
                self.coverage.observation.gap_bin.to_string(),
            ),
            (
                "coverage.obs_max_gap",
                self.coverage.observation.max_gap.to_string(),
            ),
            ("score.turn_penalty", self.score.turn_penalty.to_string()),
            ("score.road_penalty", self.score.road_penalty.to_string()),
            (
                "score.interesting_bonus",
                self.score.interesting_bonus.to_string(),
            ),
            ("score.turn_epsilon", self.score.turn_epsilon.to_string()),
        ]
    }
}

/// One `key = value` line with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setting {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a settings file into lines. `#` starts a comment.
pub fn parse_settings(text: &str, path: &Path) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SimError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        out.push(Setting {
            line: i + 1,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}
