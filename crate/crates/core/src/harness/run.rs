use super::config::{Cell, ExperimentPlan};
use super::export::write_run_artifacts;
use crate::error::ExportError;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SUMMARY_HEADER: &str =
    "cell,layout,mechanism,setup,scenario,runs,failures,mean_utrs_pct,min_utrs_pct,max_utrs_pct";

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub cell: usize,
    pub repetition: usize,
    pub seed: u64,
    pub dir: PathBuf,
    /// UTRS as a fraction, or the reason the run failed.
    pub outcome: Result<f64, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    /// UTRS of the successful repetitions, in repetition order.
    pub utrs: Vec<f64>,
    pub failures: usize,
}

impl CellSummary {
    pub fn runs(&self) -> usize {
        self.utrs.len() + self.failures
    }

    /// Mean UTRS in percent over successful runs.
    pub fn mean_pct(&self) -> Option<f64> {
        if self.utrs.is_empty() {
            return None;
        }
        Some(100.0 * self.utrs.iter().sum::<f64>() / self.utrs.len() as f64)
    }

    pub fn min_pct(&self) -> Option<f64> {
        self.utrs.iter().copied().reduce(f64::min).map(|u| 100.0 * u)
    }

    pub fn max_pct(&self) -> Option<f64> {
        self.utrs.iter().copied().reduce(f64::max).map(|u| 100.0 * u)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanSummary {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl PlanSummary {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.cell.id,
                c.cell.layout.name,
                c.cell.mechanism,
                c.cell.setup,
                c.cell.scenario(),
                c.runs(),
                c.failures,
                opt(c.mean_pct()),
                opt(c.min_pct()),
                opt(c.max_pct()),
            );
        }
        out
    }
}

pub fn run_dir(out: &Path, cell: &Cell, repetition: usize) -> PathBuf {
    out.join(&cell.id).join(format!("rep-{repetition}"))
}

fn execute(plan: &ExperimentPlan, out: &Path, cell_index: usize, repetition: usize) -> RunRecord {
    let cell = &plan.cells[cell_index];
    let config = plan.scenario_config(cell, repetition);
    let dir = run_dir(out, cell, repetition);
    let outcome = crate::engine::run(&config)
        .map_err(|e| e.to_string())
        .and_then(|result| {
            write_run_artifacts(&result, &dir)
                .map(|_| result.utrs)
                .map_err(|e| e.to_string())
        });
    RunRecord {
        cell: cell_index,
        repetition,
        seed: config.seed,
        dir,
        outcome,
    }
}

/// Runs every cell and repetition on `parallel` threads (0 for one per
/// core), writing artifacts under `out`. Failed runs are recorded in the
/// summary and in `failures.txt`; only I/O on the summary itself errors.
pub fn run_plan(
    plan: &ExperimentPlan,
    out: &Path,
    parallel: usize,
    on_done: impl Fn(&RunRecord) + Sync,
) -> Result<PlanSummary, ExportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ExportError::Io { path, source }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let jobs: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.repetitions()).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| io(out)(std::io::Error::other(e)))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let record = execute(plan, out, c, r);
                on_done(&record);
                record
            })
            .collect()
    });

    let mut cells: Vec<CellSummary> = plan
        .cells
        .iter()
        .map(|cell| CellSummary {
            cell: cell.clone(),
            utrs: Vec::new(),
            failures: 0,
        })
        .collect();
    let mut failures = String::new();
    for r in &runs {
        match &r.outcome {
            Ok(u) => cells[r.cell].utrs.push(*u),
            Err(e) => {
                cells[r.cell].failures += 1;
                let _ = writeln!(
                    failures,
                    "{} rep-{} seed {}: {e}",
                    plan.cells[r.cell].id, r.repetition, r.seed
                );
            }
        }
    }
    let summary = PlanSummary { cells, runs };
    let path = out.join("summary.csv");
    std::fs::write(&path, summary.to_csv()).map_err(io(&path))?;
    let path = out.join("failures.txt");
    if failures.is_empty() {
        if path.exists() {
            std::fs::remove_file(&path).map_err(io(&path))?;
        }
    } else {
        std::fs::write(&path, failures).map_err(io(&path))?;
    }
    Ok(summary)
}
