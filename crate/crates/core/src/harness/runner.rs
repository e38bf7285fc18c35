use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::agents::{
    apply_crossing_override, build_controller, crossing_macro_step, observe, q_train, AgentKind,
    Controller, PedestrianAction, QTable, SimRng,
};
use crate::config::{parse_settings, SimConfig};
use crate::coverage::CoverageSet;
use crate::error::{Result, SimError};
use crate::seeds;
use crate::world::{
    classify_test_event, crossing_target, spawn_initial, step, PedId, TestEvent, WorldState,
};

use super::cpu::CpuMeter;
use super::score::ScoreBreakdown;
use super::trace::{Trace, TraceHeader, TraceStep};

/// The experiment: which agent kinds and pedestrian counts, how many runs of
/// how many tests, and every model parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub kinds: Vec<AgentKind>,
    pub counts: Vec<usize>,
    pub runs_per_cell: u32,
    pub tests_per_run: u32,
    pub base_seed: u64,
    pub config: SimConfig,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            kinds: AgentKind::ALL.to_vec(),
            counts: (1..=5).collect(),
            runs_per_cell: 5,
            tests_per_run: 100,
            base_seed: 1,
            config: SimConfig::default(),
        }
    }
}

pub fn parse_kinds(s: &str) -> Result<Vec<AgentKind>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn parse_counts(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| SimError::Config(format!("bad pedestrian count {p:?}: {e}")))
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.kinds.is_empty() || self.counts.is_empty() {
            return Err(SimError::Config(
                "grid needs at least one kind and one count".into(),
            ));
        }
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        let mut counts = self.counts.clone();
        counts.sort();
        counts.dedup();
        if kinds.len() != self.kinds.len() || counts.len() != self.counts.len() {
            return Err(SimError::Config(
                "grid kinds and counts must not repeat".into(),
            ));
        }
        if let Some(&n) = self
            .counts
            .iter()
            .find(|&&n| n == 0 || n > self.config.world.max_pedestrians)
        {
            return Err(SimError::Config(format!(
                "pedestrian count {n} outside 1..={}",
                self.config.world.max_pedestrians
            )));
        }
        if self.runs_per_cell == 0 || self.tests_per_run == 0 {
            return Err(SimError::Config(
                "runs and tests per run must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Sets a `grid.*` key or delegates to the model configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_u = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|e| SimError::Config(format!("{key}: cannot parse {v:?}: {e}")))
        };
        match key {
            "grid.kinds" => self.kinds = parse_kinds(value)?,
            "grid.counts" => self.counts = parse_counts(value)?,
            "grid.runs" => self.runs_per_cell = parse_u(value)? as u32,
            "grid.tests" => self.tests_per_run = parse_u(value)? as u32,
            "grid.seed" => self.base_seed = parse_u(value)?,
            _ => self.config.set(key, value)?,
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for s in parse_settings(text, path)? {
            self.set(&s.key, &s.value).map_err(|e| SimError::Parse {
                path: path.to_path_buf(),
                line: s.line,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut grid = Self::default();
        grid.apply_text(&text, path)?;
        Ok(grid)
    }

    /// Every setting, in a form [`ExperimentGrid::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("grid.kinds = {}\n", join(&self.kinds)));
        out.push_str(&format!("grid.counts = {}\n", join(&self.counts)));
        out.push_str(&format!("grid.runs = {}\n", self.runs_per_cell));
        out.push_str(&format!("grid.tests = {}\n", self.tests_per_run));
        out.push_str(&format!("grid.seed = {}\n", self.base_seed));
        for (k, v) in self.config.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn cells(&self) -> Vec<CellId> {
        let mut cells = Vec::new();
        for &kind in &self.kinds {
            for &n in &self.counts {
                for run in 0..self.runs_per_cell {
                    cells.push(CellId { kind, n, run });
                }
            }
        }
        cells
    }

    pub fn test_count(&self) -> usize {
        self.kinds.len()
            * self.counts.len()
            * self.runs_per_cell as usize
            * self.tests_per_run as usize
    }
}

/// One run of one (kind, n) pair: `tests_per_run` consecutive tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub kind: AgentKind,
    pub n: usize,
    pub run: u32,
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/n{}/run{}", self.kind, self.n, self.run)
    }
}

/// Trace file location relative to the output directory.
pub fn trace_path(kind: AgentKind, n: usize, run: u32, test: u32) -> PathBuf {
    PathBuf::from("traces")
        .join(kind.name())
        .join(format!("n{n}"))
        .join(format!("run{run}"))
        .join(format!("test{test}.jsonl"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestRecord {
    pub kind: AgentKind,
    pub n: usize,
    pub run: u32,
    pub test: u32,
    pub spawn_seed: u64,
    pub agent_seed: u64,
    pub event: TestEvent,
    pub steps: u64,
    pub interesting: bool,
    pub road_turns: u64,
    pub road_steps: u64,
    pub score: f64,
    /// Net CPU time of all decision calls, in nanoseconds.
    pub decision_cpu_ns: u64,
    pub trace: PathBuf,
}

impl TestRecord {
    pub fn decision_cpu_ms(&self) -> f64 {
        self.decision_cpu_ns as f64 / 1e6
    }

    /// Everything except CPU time, for reproducibility comparisons.
    pub fn without_cpu(&self) -> TestRecord {
        TestRecord {
            decision_cpu_ns: 0,
            ..self.clone()
        }
    }
}

pub struct TestRun {
    pub record: TestRecord,
    pub trace: Trace,
}

/// Arms a pedestrian that asked to cross, then lets the crossing macro
/// override motion. Returns the action the world integrator should apply.
fn pre_step(
    state: &mut WorldState,
    actions: &[(PedId, PedestrianAction)],
    cfg: &SimConfig,
) -> Vec<(PedId, PedestrianAction)> {
    let geometry = &cfg.world.geometry;
    let kin = &cfg.world.kinematics;
    state
        .pedestrians
        .iter_mut()
        .zip(actions)
        .map(|(ped, &(id, action))| {
            if action == PedestrianAction::StartCrossing && ped.crossing.is_none() {
                ped.crossing = Some(crossing_target(ped.position, geometry));
            }
            match crossing_macro_step(ped, geometry, kin) {
                Some(ov) => {
                    apply_crossing_override(ped, ov);
                    (id, PedestrianAction::Noop)
                }
                None if action == PedestrianAction::StartCrossing => (id, PedestrianAction::Noop),
                None => (id, action),
            }
        })
        .collect()
}

fn trace_step(
    state: &WorldState,
    actions: Vec<(PedId, PedestrianAction)>,
    event: TestEvent,
) -> TraceStep {
    TraceStep {
        step: state.step_index,
        car: state.car,
        pedestrians: state.pedestrians.clone(),
        actions,
        event,
    }
}

/// Runs one test with a caller-supplied controller. Only the controller's
/// `decide` calls are charged to `decision_cpu`.
pub fn run_test_with(
    controller: &mut dyn Controller,
    header: TraceHeader,
    cfg: &SimConfig,
    coverage: &mut CoverageSet,
) -> Result<TestRun> {
    let world = &cfg.world;
    let geometry = &world.geometry;
    let grid = cfg.coverage_grid();
    let mut spawn_rng = SimRng::seed_from_u64(header.spawn_seed);
    let mut rng = SimRng::seed_from_u64(header.agent_seed);
    let mut state = spawn_initial(&mut spawn_rng, header.n, world)?;
    let mut meter = CpuMeter::default();
    let mut score = ScoreBreakdown::default();

    coverage.record_state(&state, &grid, geometry);
    let mut event = classify_test_event(&state, geometry, world.max_steps);
    let mut steps = vec![trace_step(&state, Vec::new(), event)];
    while event == TestEvent::None {
        let actions = meter.time(|| controller.decide(&state, &mut rng))?;
        if actions.len() != state.pedestrians.len()
            || actions
                .iter()
                .zip(&state.pedestrians)
                .any(|((id, _), p)| *id != p.id)
        {
            return Err(SimError::Contract(
                "controller must return one action per pedestrian, in order".into(),
            ));
        }
        for (p, &(_, a)) in state.pedestrians.iter().zip(&actions) {
            coverage.record_action(&observe(p, &state.car, geometry), a, &grid);
        }
        let mut pre = state.clone();
        let effective = pre_step(&mut pre, &actions, cfg);
        let next = step(&pre, &effective, &world.kinematics, geometry)?;
        coverage.record_state(&next, &grid, geometry);
        score.add_transition(&state.pedestrians, &next.pedestrians, geometry, &cfg.score);
        event = classify_test_event(&next, geometry, world.max_steps);
        steps.push(trace_step(&next, actions, event));
        state = next;
    }
    score.interesting = event == TestEvent::InterestingIntrusion;
    let record = TestRecord {
        kind: header.kind,
        n: header.n,
        run: header.run,
        test: header.test,
        spawn_seed: header.spawn_seed,
        agent_seed: header.agent_seed,
        event,
        steps: state.step_index,
        interesting: score.interesting,
        road_turns: score.road_turns,
        road_steps: score.road_steps,
        score: score.score(&cfg.score),
        decision_cpu_ns: meter.net_ns(),
        trace: trace_path(header.kind, header.n, header.run, header.test),
    };
    Ok(TestRun {
        record,
        trace: Trace { header, steps },
    })
}

pub fn test_header(
    kind: AgentKind,
    n: usize,
    run: u32,
    test: u32,
    base_seed: u64,
    cfg: &SimConfig,
) -> TraceHeader {
    TraceHeader {
        kind,
        n,
        run,
        test,
        spawn_seed: seeds::spawn_seed(base_seed, n, run, test),
        agent_seed: seeds::agent_seed(base_seed, kind.index(), n, run, test),
        dt: cfg.world.dt,
    }
}

/// Runs one test of `kind` with `n` pedestrians in test slot (`run`, `test`).
#[allow(clippy::too_many_arguments)]
pub fn run_test(
    kind: AgentKind,
    n: usize,
    run: u32,
    test: u32,
    base_seed: u64,
    cfg: &SimConfig,
    qtable: Option<&Arc<QTable>>,
    coverage: &mut CoverageSet,
) -> Result<TestRun> {
    let mut controller = build_controller(kind, cfg, qtable, n)?;
    let header = test_header(kind, n, run, test, base_seed, cfg);
    run_test_with(controller.as_mut(), header, cfg, coverage)
}

pub struct CellOutput {
    pub cell: CellId,
    pub records: Vec<TestRecord>,
    pub coverage: CoverageSet,
}

/// Runs every test of one cell in order, writing traces under `out` if given.
pub fn run_cell(
    cell: CellId,
    grid: &ExperimentGrid,
    qtable: Option<&Arc<QTable>>,
    out: Option<&Path>,
) -> Result<CellOutput> {
    let cfg = &grid.config;
    let mut coverage = CoverageSet::new(&cfg.coverage_grid(), cell.n);
    let mut records = Vec::with_capacity(grid.tests_per_run as usize);
    for test in 0..grid.tests_per_run {
        let run = run_test(
            cell.kind,
            cell.n,
            cell.run,
            test,
            grid.base_seed,
            cfg,
            qtable,
            &mut coverage,
        )?;
        if let Some(dir) = out {
            let path = dir.join(&run.record.trace);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| SimError::io(parent, e))?;
            }
            std::fs::write(&path, run.trace.to_jsonl()).map_err(|e| SimError::io(&path, e))?;
        }
        records.push(run.record);
    }
    Ok(CellOutput {
        cell,
        records,
        coverage,
    })
}

pub type LedgerMap = BTreeMap<(AgentKind, usize), CoverageSet>;

#[derive(Default)]
pub struct GridResult {
    pub records: Vec<TestRecord>,
    pub ledgers: LedgerMap,
    pub failures: Vec<SimError>,
}

/// Trains the table the grid's Q-learning agents use.
pub fn train_qtable(grid: &ExperimentGrid) -> Result<QTable> {
    let q = &grid.config.qlearning;
    q_train(
        &grid.config.world,
        q.episodes,
        q,
        seeds::qtrain_seed(grid.base_seed),
    )
}

/// Runs `cells` concurrently. Results are assembled in the order given, and
/// a failing cell is reported without stopping the others.
pub fn run_cells(
    grid: &ExperimentGrid,
    cells: &[CellId],
    qtable: Option<Arc<QTable>>,
    out: Option<&Path>,
) -> Result<GridResult> {
    grid.validate()?;
    let qtable = match qtable {
        Some(t) => Some(t),
        None if cells.iter().any(|c| c.kind == AgentKind::QLearning) => {
            Some(Arc::new(train_qtable(grid)?))
        }
        None => None,
    };
    let outputs: Vec<Result<CellOutput>> = cells
        .par_iter()
        .map(|&cell| {
            run_cell(cell, grid, qtable.as_ref(), out).map_err(|e| SimError::Cell {
                cell: cell.to_string(),
                source: Box::new(e),
            })
        })
        .collect();
    let mut result = GridResult::default();
    for o in outputs {
        match o {
            Ok(o) => {
                let key = (o.cell.kind, o.cell.n);
                match result.ledgers.get_mut(&key) {
                    Some(l) => l.merge(&o.coverage)?,
                    None => {
                        result.ledgers.insert(key, o.coverage);
                    }
                }
                result.records.extend(o.records);
            }
            Err(e) => result.failures.push(e),
        }
    }
    result.records.sort_by_key(|r| (r.kind, r.n, r.run, r.test));
    Ok(result)
}

pub fn run_grid(
    grid: &ExperimentGrid,
    qtable: Option<Arc<QTable>>,
    out: Option<&Path>,
) -> Result<GridResult> {
    run_cells(grid, &grid.cells(), qtable, out)
}
