//! Discretized coverage ledgers: situations, scenarios and agent actions.
//!
//! A situation is the car's longitudinal bin plus the multiset of
//! (longitudinal bin, lateral region) over pedestrians. A scenario refines
//! each pedestrian entry with heading and speed bins. An action key pairs an
//! observation bin with the action taken.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::qlearning::heading_bin;
use crate::agents::{q_state_key, Observation, ObservationGrid, PedestrianAction};
use crate::error::{Result, SimError};
use crate::world::{Region, RoadGeometry, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    pub x_bin: f64,
    pub heading_bins: u32,
    pub speed_bins: u32,
    pub road_length: f64,
    pub v_max: f64,
    pub observation: ObservationGrid,
}

impl Default for DiscretizationGrid {
    fn default() -> Self {
        Self {
            x_bin: 3.0,
            heading_bins: 8,
            speed_bins: 3,
            road_length: 99.0,
            v_max: 2.5,
            observation: ObservationGrid::default(),
        }
    }
}

impl DiscretizationGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_bin > 0.0) || self.heading_bins == 0 || self.speed_bins == 0 {
            return Err(SimError::Config(format!("invalid coverage grid: {self:?}")));
        }
        if !(self.road_length > 0.0) || !(self.v_max > 0.0) || !(self.observation.gap_bin > 0.0) {
            return Err(SimError::Config(format!("invalid coverage grid: {self:?}")));
        }
        Ok(())
    }

    pub fn x_bins(&self) -> u64 {
        (self.road_length / self.x_bin).floor() as u64 + 1
    }

    pub fn x_index(&self, x: f64) -> u64 {
        let b = (x.max(0.0) / self.x_bin).floor() as u64;
        b.min(self.x_bins() - 1)
    }

    pub fn speed_index(&self, speed: f64) -> u32 {
        let b = (speed.max(0.0) / self.v_max * self.speed_bins as f64).floor() as u32;
        b.min(self.speed_bins - 1)
    }

    fn per_pedestrian_situations(&self) -> u64 {
        self.x_bins() * Region::ALL.len() as u64
    }

    /// Number of distinct situation keys for `n` pedestrians: car bins times
    /// multisets of size `n` over (bin, region).
    pub fn situation_space(&self, n: usize) -> u64 {
        self.x_bins()
            .saturating_mul(multisets(self.per_pedestrian_situations(), n as u64))
    }

    pub fn scenario_space(&self, n: usize) -> u64 {
        let per =
            self.per_pedestrian_situations() * self.heading_bins as u64 * self.speed_bins as u64;
        self.x_bins().saturating_mul(multisets(per, n as u64))
    }

    pub fn action_space(&self) -> u64 {
        self.observation.key_space_size() * PedestrianAction::ALL.len() as u64
    }
}

/// Number of multisets of size `k` drawn from `m` kinds, saturating.
pub fn multisets(m: u64, k: u64) -> u64 {
    if k == 0 {
        return 1;
    }
    if m == 0 {
        return 0;
    }
    // C(m + k - 1, k), built incrementally so every partial is an integer.
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((m + i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u64::MAX,
        };
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

pub fn situation_key(
    state: &WorldState,
    grid: &DiscretizationGrid,
    geometry: &RoadGeometry,
) -> String {
    let mut peds: Vec<(u64, Region)> = state
        .pedestrians
        .iter()
        .map(|p| (grid.x_index(p.position.x), geometry.region(p.position)))
        .collect();
    peds.sort_unstable();
    let mut key = format!("c{}|", grid.x_index(state.car.position.x));
    for (i, (x, r)) in peds.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        let _ = write!(key, "{x}{}", r.code());
    }
    key
}

pub fn scenario_key(
    state: &WorldState,
    grid: &DiscretizationGrid,
    geometry: &RoadGeometry,
) -> String {
    let mut peds: Vec<(u64, Region, u32, u32)> = state
        .pedestrians
        .iter()
        .map(|p| {
            (
                grid.x_index(p.position.x),
                geometry.region(p.position),
                heading_bin(p.heading, grid.heading_bins),
                grid.speed_index(p.speed),
            )
        })
        .collect();
    peds.sort_unstable();
    let mut key = format!("c{}|", grid.x_index(state.car.position.x));
    for (i, (x, r, h, v)) in peds.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        let _ = write!(key, "{x}{}h{h}v{v}", r.code());
    }
    key
}

pub fn action_key(
    obs: &Observation,
    action: PedestrianAction,
    grid: &DiscretizationGrid,
) -> String {
    format!("{}|{}", q_state_key(obs, &grid.observation), action.name())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Situation,
    Scenario,
    Action,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Situation, Metric::Scenario, Metric::Action];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Situation => "SITUATION",
            Metric::Scenario => "SCENARIO",
            Metric::Action => "ACTION",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown coverage metric {s:?}")))
    }
}

/// Occurrence counts of discretized keys for one metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageLedger {
    pub metric: Metric,
    pub key_space_size: u64,
    counts: BTreeMap<String, u64>,
}

impl CoverageLedger {
    pub fn new(metric: Metric, key_space_size: u64) -> Self {
        Self {
            metric,
            key_space_size,
            counts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, key: impl Into<String>) {
        *self.counts.entry(key.into()).or_insert(0) += 1;
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn unique(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn coverage_ratio(&self) -> f64 {
        if self.key_space_size == 0 {
            return 0.0;
        }
        self.unique() as f64 / self.key_space_size as f64
    }

    /// Count-wise sum. Associative and commutative.
    pub fn merge(&mut self, other: &CoverageLedger) -> Result<()> {
        if self.metric != other.metric || self.key_space_size != other.key_space_size {
            return Err(SimError::Contract(format!(
                "cannot merge {} ledger (space {}) into {} ledger (space {})",
                other.metric, other.key_space_size, self.metric, self.key_space_size
            )));
        }
        for (k, c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        Ok(())
    }

    pub fn to_text(&self, grid: &DiscretizationGrid) -> String {
        let mut out = format!(
            "# metric={}\n# x_bin={} heading_bins={} speed_bins={} obs_gap_bin={}\n# key_space_size={}\n",
            self.metric,
            grid.x_bin,
            grid.heading_bins,
            grid.speed_bins,
            grid.observation.gap_bin,
            self.key_space_size
        );
        for (k, c) in &self.counts {
            let _ = writeln!(out, "{k}\t{c}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| SimError::Parse {
            path: "<ledger>".into(),
            line,
            msg,
        };
        let mut metric = None;
        let mut space = None;
        let mut counts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                for kv in h.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("metric", v)) => metric = Some(v.parse::<Metric>()?),
                        Some(("key_space_size", v)) => {
                            space = Some(v.parse::<u64>().map_err(|e| bad(i + 1, e.to_string()))?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (k, c) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(i + 1, "expected key<TAB>count".into()))?;
            let c: u64 = c.parse().map_err(|e| bad(i + 1, format!("{e}")))?;
            if c == 0 {
                return Err(bad(i + 1, "counts must be positive".into()));
            }
            counts.insert(k.to_string(), c);
        }
        Ok(Self {
            metric: metric.ok_or_else(|| bad(0, "missing metric header".into()))?,
            key_space_size: space.ok_or_else(|| bad(0, "missing key_space_size header".into()))?,
            counts,
        })
    }
}

/// The three ledgers kept for one group of tests with the same pedestrian count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageSet {
    pub situation: CoverageLedger,
    pub scenario: CoverageLedger,
    pub action: CoverageLedger,
}

impl CoverageSet {
    pub fn new(grid: &DiscretizationGrid, n: usize) -> Self {
        Self {
            situation: CoverageLedger::new(Metric::Situation, grid.situation_space(n)),
            scenario: CoverageLedger::new(Metric::Scenario, grid.scenario_space(n)),
            action: CoverageLedger::new(Metric::Action, grid.action_space()),
        }
    }

    /// Situation and scenario of a world snapshot.
    pub fn record_state(
        &mut self,
        state: &WorldState,
        grid: &DiscretizationGrid,
        geometry: &RoadGeometry,
    ) {
        self.situation.record(situation_key(state, grid, geometry));
        self.scenario.record(scenario_key(state, grid, geometry));
    }

    pub fn record_action(
        &mut self,
        obs: &Observation,
        action: PedestrianAction,
        grid: &DiscretizationGrid,
    ) {
        self.action.record(action_key(obs, action, grid));
    }

    pub fn merge(&mut self, other: &CoverageSet) -> Result<()> {
        self.situation.merge(&other.situation)?;
        self.scenario.merge(&other.scenario)?;
        self.action.merge(&other.action)
    }

    pub fn get(&self, metric: Metric) -> &CoverageLedger {
        match metric {
            Metric::Situation => &self.situation,
            Metric::Scenario => &self.scenario,
            Metric::Action => &self.action,
        }
    }
}
