use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rmfs_core::harness::{load_config, run_plan};
use rmfs_core::world::LayoutSpec;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Parser)]
#[command(
    name = "rmfs",
    version,
    about = "Pod repositioning experiments for robotic mobile fulfillment systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell and repetition of an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the file and RMFS_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for one per core.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// List the built-in layouts.
    Layouts,
    /// Check an experiment file and print its cells.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        // closed pipe, e.g. `rmfs layouts | head -1`
        Err(e) if e.downcast_ref::<std::io::Error>().map(|e| e.kind()) == Some(std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Layouts => {
            writeln!(stdout, "name   pick  replenish  aisles(h x v)  locations  pods")?;
            for l in LayoutSpec::builtins() {
                writeln!(
                    stdout,
                    "{:<6} {:>4}  {:>9}  {:>6} x {:<4}  {:>9}  {:>4}",
                    l.name,
                    l.pick_stations,
                    l.replenish_stations,
                    l.aisles_horizontal,
                    l.aisles_vertical,
                    l.storage_location_count(),
                    l.pods
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let plan = load_config(&config).with_context(|| format!("invalid config {}", config.display()))?;
            writeln!(
                stdout,
                "{} cells x {} repetitions, {} h horizon",
                plan.cells.len(),
                plan.repetitions(),
                plan.config.horizon_hours
            )?;
            for cell in &plan.cells {
                writeln!(stdout, "{}", cell.id)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out, parallel } => {
            let plan = load_config(&config).with_context(|| format!("invalid config {}", config.display()))?;
            let out = out
                .or_else(|| std::env::var_os("RMFS_OUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(&plan.config.output_dir));
            let parallel = parallel.unwrap_or(plan.config.parallel);
            let total = plan.cells.len() * plan.repetitions();
            let done = AtomicUsize::new(0);
            let summary = run_plan(&plan, &out, parallel, |r| {
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                let cell = &plan.cells[r.cell].id;
                match &r.outcome {
                    Ok(u) => eprintln!("[{n}/{total}] {cell} rep-{} utrs {:.2}%", r.repetition, 100.0 * u),
                    Err(e) => eprintln!("[{n}/{total}] {cell} rep-{} FAILED: {e}", r.repetition),
                }
            })?;
            write!(stdout, "{}", summary.to_csv())?;
            let failed = summary.failed_runs();
            if failed > 0 {
                bail!(
                    "{failed} of {total} runs failed, see {}",
                    out.join("failures.txt").display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
