//! Persisted artifacts and their recomputation from traces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::agents::{observe, AgentKind};
use crate::coverage::{CoverageSet, Metric};
use crate::error::{Result, SimError};
use crate::world::TestEvent;

use super::runner::{ExperimentGrid, GridResult, LedgerMap, TestRecord};
use super::score::score_breakdown;
use super::summary::{summarize, SummaryRow};
use super::trace::Trace;

pub const CONFIG_FILE: &str = "config.cfg";
pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const LEDGER_DIR: &str = "ledgers";

const RECORDS_HEADER: &str =
    "agent_kind,n,run,test,spawn_seed,agent_seed,event,steps,interesting,road_turns,road_steps,score,decision_cpu_ms,trace";
const SUMMARY_HEADER: &str = "agent_kind,n,tests,interesting,accuracy_pct,score_sum,mean_cpu_ms,situation_unique,situation_coverage,scenario_unique,scenario_coverage,action_unique,action_coverage";
const CURVES_HEADER: &str = "metric,agent_kind,n,value";

pub const CURVE_METRICS: [&str; 5] = [
    "accuracy_pct",
    "score_sum",
    "mean_cpu_ms",
    "situation_coverage",
    "action_coverage",
];

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| SimError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| SimError::io(path, e))
}

pub fn records_csv(records: &[TestRecord]) -> String {
    let mut out = format!("{RECORDS_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{}",
            r.kind,
            r.n,
            r.run,
            r.test,
            r.spawn_seed,
            r.agent_seed,
            r.event.name(),
            r.steps,
            u8::from(r.interesting),
            r.road_turns,
            r.road_steps,
            r.score,
            r.decision_cpu_ms(),
            r.trace.display()
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{},{:.6},{},{:.6},{},{:.6}",
            r.kind,
            r.n,
            r.tests,
            r.interesting,
            r.accuracy_pct,
            r.score_sum,
            r.mean_cpu_ms,
            r.situation_unique,
            r.situation_coverage,
            r.scenario_unique,
            r.scenario_coverage,
            r.action_unique,
            r.action_coverage
        );
    }
    out
}

/// Long-form figure data: one row per metric, kind and count of the grid.
/// Action coverage is the unique key count; situation coverage is a ratio.
pub fn curves_csv(rows: &[SummaryRow], kinds: &[AgentKind], counts: &[usize]) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    if rows.is_empty() {
        return out;
    }
    for metric in CURVE_METRICS {
        for &kind in kinds {
            for &n in counts {
                let row = rows.iter().find(|r| r.kind == kind && r.n == n);
                let value = row.map_or(0.0, |r| match metric {
                    "accuracy_pct" => r.accuracy_pct,
                    "score_sum" => r.score_sum,
                    "mean_cpu_ms" => r.mean_cpu_ms,
                    "situation_coverage" => r.situation_coverage,
                    _ => r.action_unique as f64,
                });
                let _ = writeln!(out, "{metric},{kind},{n},{value:.6}");
            }
        }
    }
    out
}

pub fn ledger_path(kind: AgentKind, n: usize, metric: Metric) -> PathBuf {
    PathBuf::from(LEDGER_DIR).join(format!(
        "{kind}_n{n}_{}.tsv",
        metric.name().to_ascii_lowercase()
    ))
}

/// Writes config, records, summary, curves and ledgers. Traces are written
/// while the grid runs.
pub fn emit_outputs(
    out: &Path,
    grid: &ExperimentGrid,
    result: &GridResult,
) -> Result<Vec<SummaryRow>> {
    let rows = if result.records.is_empty() {
        Vec::new()
    } else {
        summarize(&result.records, &result.ledgers)?
    };
    write(&out.join(CONFIG_FILE), &grid.to_text())?;
    write(&out.join(RECORDS_FILE), &records_csv(&result.records))?;
    write(&out.join(SUMMARY_FILE), &summary_csv(&rows))?;
    write(
        &out.join(CURVES_FILE),
        &curves_csv(&rows, &grid.kinds, &grid.counts),
    )?;
    let cov = grid.config.coverage_grid();
    for (&(kind, n), set) in &result.ledgers {
        for metric in Metric::ALL {
            write(
                &out.join(ledger_path(kind, n, metric)),
                &set.get(metric).to_text(&cov),
            )?;
        }
    }
    Ok(rows)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<TestRecord>> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: String| SimError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(bad(format!("expected 14 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        out.push(TestRecord {
            kind: f[0].parse()?,
            n: int(f[1])? as usize,
            run: int(f[2])? as u32,
            test: int(f[3])? as u32,
            spawn_seed: int(f[4])?,
            agent_seed: int(f[5])?,
            event: TestEvent::from_name(f[6])
                .ok_or_else(|| bad(format!("unknown event {:?}", f[6])))?,
            steps: int(f[7])?,
            interesting: int(f[8])? == 1,
            road_turns: int(f[9])?,
            road_steps: int(f[10])?,
            score: float(f[11])?,
            decision_cpu_ns: (float(f[12])? * 1e6).round() as u64,
            trace: PathBuf::from(f[13]),
        });
    }
    Ok(out)
}

/// Rebuilds a record from its trace alone; CPU time is not in the trace and
/// is taken from `cpu_ns`.
pub fn record_from_trace(
    trace: &Trace,
    grid: &ExperimentGrid,
    path: PathBuf,
    cpu_ns: u64,
) -> TestRecord {
    let cfg = &grid.config;
    let b = score_breakdown(trace, &cfg.score, &cfg.world.geometry);
    let h = &trace.header;
    TestRecord {
        kind: h.kind,
        n: h.n,
        run: h.run,
        test: h.test,
        spawn_seed: h.spawn_seed,
        agent_seed: h.agent_seed,
        event: trace.final_event(),
        steps: trace.step_count(),
        interesting: b.interesting,
        road_turns: b.road_turns,
        road_steps: b.road_steps,
        score: b.score(&cfg.score),
        decision_cpu_ns: cpu_ns,
        trace: path,
    }
}

/// Replays a trace's states and actions into `set`.
pub fn record_trace_coverage(trace: &Trace, grid: &ExperimentGrid, set: &mut CoverageSet) {
    let cfg = &grid.config;
    let cov = cfg.coverage_grid();
    let geometry = &cfg.world.geometry;
    for i in 0..trace.steps.len() {
        set.record_state(&trace.world(i), &cov, geometry);
        if i > 0 {
            let prev = &trace.steps[i - 1];
            for (p, &(_, a)) in prev.pedestrians.iter().zip(&trace.steps[i].actions) {
                set.record_action(&observe(p, &prev.car, geometry), a, &cov);
            }
        }
    }
}

pub struct Recomputed {
    pub grid: ExperimentGrid,
    pub records: Vec<TestRecord>,
    pub ledgers: LedgerMap,
}

/// Re-reads an output directory and rebuilds records and ledgers from the
/// traces listed in its records file.
pub fn recompute(out: &Path) -> Result<Recomputed> {
    let grid = ExperimentGrid::load(&out.join(CONFIG_FILE))?;
    let listed = read_records_csv(&out.join(RECORDS_FILE))?;
    let cov = grid.config.coverage_grid();
    let mut ledgers = LedgerMap::new();
    let mut records = Vec::with_capacity(listed.len());
    for r in listed {
        let trace = Trace::read(&out.join(&r.trace))?;
        let set = ledgers
            .entry((trace.header.kind, trace.header.n))
            .or_insert_with(|| CoverageSet::new(&cov, trace.header.n));
        record_trace_coverage(&trace, &grid, set);
        records.push(record_from_trace(&trace, &grid, r.trace, r.decision_cpu_ns));
    }
    Ok(Recomputed {
        grid,
        records,
        ledgers,
    })
}

/// Recomputes the summary of an output directory from its traces.
pub fn resummarize(out: &Path) -> Result<Vec<SummaryRow>> {
    let r = recompute(out)?;
    if r.records.is_empty() {
        return Ok(Vec::new());
    }
    summarize(&r.records, &r.ledgers)
}
