//! Experiment grid execution, scoring, timing and persisted outputs.

pub mod cpu;
mod output;
mod runner;
mod score;
mod summary;
mod trace;

pub use output::{
    curves_csv, emit_outputs, ledger_path, read_records_csv, recompute, record_from_trace,
    record_trace_coverage, records_csv, resummarize, summary_csv, Recomputed, CONFIG_FILE,
    CURVES_FILE, CURVE_METRICS, LEDGER_DIR, RECORDS_FILE, SUMMARY_FILE,
};
pub use runner::{
    parse_counts, parse_kinds, run_cell, run_cells, run_grid, run_test, run_test_with, test_header,
    trace_path, train_qtable, CellId, CellOutput, ExperimentGrid, GridResult, LedgerMap,
    TestRecord, TestRun,
};
pub use score::{score_breakdown, score_test, ScoreBreakdown, ScoreWeights};
pub use summary::{accuracy_pct, summarize, SummaryRow};
pub use trace::{Trace, TraceHeader, TraceStep};
