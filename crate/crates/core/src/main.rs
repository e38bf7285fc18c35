use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use pedsim::agents::QTable;
use pedsim::harness::{
    curves_csv, emit_outputs, parse_counts, parse_kinds, recompute, run_grid, summarize,
    summary_csv, train_qtable, ExperimentGrid, SummaryRow, CURVES_FILE, SUMMARY_FILE,
};
use pedsim::{Result, SimError};

#[derive(Parser)]
#[command(
    name = "pedsim",
    version,
    about = "Road-crossing pedestrian agents for AV test generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write traces, records, summaries and ledgers.
    Run {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
        /// Load a Q-table instead of training one.
        #[arg(long)]
        qtable: Option<PathBuf>,
    },
    /// Recompute summary.csv and curves.csv from the traces in an output directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Q-table and write it to a file.
    TrainQ {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated agent kinds.
    #[arg(long)]
    kinds: Option<String>,
    /// Comma-separated pedestrian counts.
    #[arg(long)]
    counts: Option<String>,
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    tests: Option<u32>,
    /// Override any configuration key, e.g. `--set mpc.horizon_steps=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl GridArgs {
    fn build(&self) -> Result<ExperimentGrid> {
        let mut grid = match &self.config {
            Some(p) => ExperimentGrid::load(p)?,
            None => ExperimentGrid::default(),
        };
        if let Some(s) = self.seed {
            grid.base_seed = s;
        }
        if let Some(k) = &self.kinds {
            grid.kinds = parse_kinds(k)?;
        }
        if let Some(c) = &self.counts {
            grid.counts = parse_counts(c)?;
        }
        if let Some(r) = self.runs {
            grid.runs_per_cell = r;
        }
        if let Some(t) = self.tests {
            grid.tests_per_run = t;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            grid.set(k.trim(), v.trim())?;
        }
        grid.validate()?;
        Ok(grid)
    }
}

fn print_rows(rows: &[SummaryRow]) {
    println!(
        "{:<12} {:>2} {:>6} {:>9} {:>11} {:>12} {:>10} {:>8}",
        "kind", "n", "tests", "acc%", "score", "cpu_ms", "sit_cov", "act_uniq"
    );
    for r in rows {
        println!(
            "{:<12} {:>2} {:>6} {:>9.4} {:>11.1} {:>12.6} {:>10.6} {:>8}",
            r.kind.name(),
            r.n,
            r.tests,
            r.accuracy_pct,
            r.score_sum,
            r.mean_cpu_ms,
            r.situation_coverage,
            r.action_unique
        );
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { grid, out, qtable } => {
            let grid = grid.build()?;
            let table = match qtable {
                Some(p) => Some(Arc::new(QTable::load(&p, grid.config.qlearning)?)),
                None => None,
            };
            std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;
            let result = run_grid(&grid, table, Some(&out))?;
            let rows = emit_outputs(&out, &grid, &result)?;
            print_rows(&rows);
            for f in &result.failures {
                eprintln!("error: {f}");
            }
            Ok(result.failures.is_empty())
        }
        Command::Summarize { out } => {
            let r = recompute(&out)?;
            let rows = if r.records.is_empty() {
                Vec::new()
            } else {
                summarize(&r.records, &r.ledgers)?
            };
            write_file(&out.join(SUMMARY_FILE), &summary_csv(&rows))?;
            write_file(
                &out.join(CURVES_FILE),
                &curves_csv(&rows, &r.grid.kinds, &r.grid.counts),
            )?;
            print_rows(&rows);
            Ok(true)
        }
        Command::TrainQ { grid, out } => {
            let grid = grid.build()?;
            let table = train_qtable(&grid)?;
            table.save(&out)?;
            eprintln!("wrote {} states to {}", table.len(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
