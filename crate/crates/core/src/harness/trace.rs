//! Per-test step logs, one JSON object per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, PedestrianAction};
use crate::error::{Result, SimError};
use crate::world::{CarState, PedId, PedestrianState, TestEvent, WorldState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: AgentKind,
    pub n: usize,
    pub run: u32,
    pub test: u32,
    pub spawn_seed: u64,
    pub agent_seed: u64,
    pub dt: f64,
}

/// World state after `step` transitions. `actions` are the policy's choices
/// that produced this state; empty for the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u64,
    pub car: CarState,
    pub pedestrians: Vec<PedestrianState>,
    pub actions: Vec<(PedId, PedestrianAction)>,
    pub event: TestEvent,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(TraceHeader),
    Step(TraceStep),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn world(&self, i: usize) -> WorldState {
        let s = &self.steps[i];
        WorldState {
            car: s.car,
            pedestrians: s.pedestrians.clone(),
            step_index: s.step,
            dt: self.header.dt,
        }
    }

    pub fn final_event(&self) -> TestEvent {
        self.steps.last().map_or(TestEvent::None, |s| s.event)
    }

    /// Number of transitions taken.
    pub fn step_count(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.step)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            // Plain data with string keys: serialization cannot fail.
            out.push_str(&serde_json::to_string(line).expect("trace line serializes"));
            out.push('\n');
        };
        push(&Line::Header(self.header.clone()));
        for s in &self.steps {
            push(&Line::Step(s.clone()));
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let bad = |msg: String| SimError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            match serde_json::from_str::<Line>(raw).map_err(|e| bad(e.to_string()))? {
                Line::Header(h) if header.is_none() && i == 0 => header = Some(h),
                Line::Header(_) => return Err(bad("unexpected header".into())),
                Line::Step(s) => steps.push(s),
            }
        }
        let header = header.ok_or_else(|| SimError::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing header".into(),
        })?;
        if steps.is_empty() {
            return Err(SimError::Parse {
                path: path.to_path_buf(),
                line: 2,
                msg: "trace has no steps".into(),
            });
        }
        Ok(Self { header, steps })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_jsonl(&text, path)
    }
}
