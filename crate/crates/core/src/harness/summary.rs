use std::collections::BTreeMap;

use crate::agents::AgentKind;
use crate::error::{Result, SimError};

use super::runner::{LedgerMap, TestRecord};

/// One (agent kind, pedestrian count) group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub kind: AgentKind,
    pub n: usize,
    pub tests: u64,
    pub interesting: u64,
    pub accuracy_pct: f64,
    pub score_sum: f64,
    pub mean_cpu_ms: f64,
    pub situation_unique: u64,
    pub situation_coverage: f64,
    pub scenario_unique: u64,
    pub scenario_coverage: f64,
    pub action_unique: u64,
    pub action_coverage: f64,
}

pub fn accuracy_pct(interesting: u64, tests: u64) -> f64 {
    100.0 * interesting as f64 / tests as f64
}

/// Groups records by (kind, n). Coverage columns come from `ledgers` and
/// are zero for groups without one.
pub fn summarize(records: &[TestRecord], ledgers: &LedgerMap) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(SimError::Contract(
            "cannot summarize an empty record set".into(),
        ));
    }
    #[derive(Default)]
    struct Acc {
        tests: u64,
        interesting: u64,
        score: f64,
        cpu_ns: u64,
    }
    let mut groups: BTreeMap<(AgentKind, usize), Acc> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.kind, r.n)).or_default();
        g.tests += 1;
        g.interesting += u64::from(r.interesting);
        g.score += r.score;
        g.cpu_ns += r.decision_cpu_ns;
    }
    Ok(groups
        .into_iter()
        .map(|((kind, n), g)| {
            let l = ledgers.get(&(kind, n));
            SummaryRow {
                kind,
                n,
                tests: g.tests,
                interesting: g.interesting,
                accuracy_pct: accuracy_pct(g.interesting, g.tests),
                score_sum: g.score,
                mean_cpu_ms: g.cpu_ns as f64 / 1e6 / g.tests as f64,
                situation_unique: l.map_or(0, |l| l.situation.unique()),
                situation_coverage: l.map_or(0.0, |l| l.situation.coverage_ratio()),
                scenario_unique: l.map_or(0, |l| l.scenario.unique()),
                scenario_coverage: l.map_or(0.0, |l| l.scenario.coverage_ratio()),
                action_unique: l.map_or(0, |l| l.action.unique()),
                action_coverage: l.map_or(0.0, |l| l.action.coverage_ratio()),
            }
        })
        .collect())
}
