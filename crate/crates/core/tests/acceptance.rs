//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; exits non-zero when any criterion fails.

mod common;

use common::{brute_force_sortedness, label_correcting, Frozen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rmfs_core::engine::result::RunResult;
use rmfs_core::engine::{run, HOUR};
use rmfs_core::harness::{parse_config, write_run_artifacts, ExperimentPlan};
use rmfs_core::ids::NodeId;
use rmfs_core::layout::generate_layout;
use rmfs_core::pathtime::{PathTimeEstimator, PathTimeParams, ProminenceField};
use rmfs_core::policy::{next_active_move, Mechanism};
use rmfs_core::scoring::{compute_ranks, throughput_upper_bound, utrs, well_sortedness};
use rmfs_core::world::LayoutSpec;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

const SORTEDNESS_INSTANCES: usize = 200;
const SORTEDNESS_BUDGET: Duration = Duration::from_secs(10);
const PATH_PAIRS_PER_LAYOUT: usize = 100;
const PATH_TOLERANCE: f64 = 1e-9;
const PATH_BUDGET: Duration = Duration::from_secs(30);
/// Slack on top of two runs for exporting and comparing files.
const DETERMINISM_SLACK: f64 = 1.25;
const RUN_BUDGET: Duration = Duration::from_secs(600);
const INDIFFERENCE_TOLERANCE_PCT: f64 = 1.5;
const FROZEN_INSTANCES: usize = 50;

/// Seeds of every experiment below derive from this value, fixed up front.
const BASE_SEED: u64 = 1;

struct Verdict {
    number: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(number: u32, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict {
        number,
        name,
        pass,
        detail,
    }
}

fn sortedness_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for k in 0..SORTEDNESS_INSTANCES {
        let locations = rng.random_range(1..=20);
        let pods = rng.random_range(0..=locations.min(20));
        let prominence: Vec<f64> = (0..locations).map(|_| rng.random_range(0..6) as f64 * 1.5).collect();
        let mut scores: Vec<Option<f64>> = vec![None; locations];
        let mut spots: Vec<usize> = (0..locations).collect();
        spots.shuffle(&mut rng);
        for &s in &spots[..pods] {
            scores[s] = Some(if rng.random_bool(0.5) {
                rng.random_range(0..4) as f64 / 4.0
            } else {
                rng.random::<f64>()
            });
        }
        let ranks = compute_ranks(&ProminenceField::from_values(prominence.clone()));
        let got = well_sortedness(&ranks, |l| scores[l.index()]);
        let (c, d) = brute_force_sortedness(&prominence, &scores);
        let a = if c == 0 { 0.0 } else { d as f64 / c as f64 };
        if (got.misplacements, got.offset_sum, got.average) != (c, d, a) {
            mismatches.push(k);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "well-sortedness matches brute force",
        mismatches.is_empty() && elapsed < SORTEDNESS_BUDGET,
        format!("{SORTEDNESS_INSTANCES} instances, mismatches {mismatches:?}, {elapsed:.2?}"),
    )
}

fn path_time_oracle() -> Verdict {
    let start = Instant::now();
    let params = PathTimeParams {
        turn_penalty: 0.0,
        ..PathTimeParams::default()
    };
    let mut worst = 0.0f64;
    let mut disagreements = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for spec in LayoutSpec::builtins() {
        let world = generate_layout(&spec).unwrap();
        let mut est = PathTimeEstimator::new(world.graph.clone(), params);
        let n = world.graph.node_count();
        let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for _ in 0..PATH_PAIRS_PER_LAYOUT {
            by_source
                .entry(rng.random_range(0..n))
                .or_default()
                .push(rng.random_range(0..n));
        }
        for (from, targets) in by_source {
            let from = NodeId::from_index(from);
            let oracle = label_correcting(&world.graph, from, params.cruise_speed);
            for to in targets {
                match (est.path_time_uncached(from, NodeId::from_index(to)), oracle[to]) {
                    (Some(t), o) if o.is_finite() => worst = worst.max((t - o).abs()),
                    (None, o) if o.is_infinite() => {}
                    _ => disagreements += 1,
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "path time without turns matches label correcting",
        disagreements == 0 && worst <= PATH_TOLERANCE && elapsed < PATH_BUDGET,
        format!("4 layouts x {PATH_PAIRS_PER_LAYOUT} pairs, max error {worst:e}, reachability mismatches {disagreements}, {elapsed:.2?}"),
    )
}

fn upper_bound() -> Verdict {
    let stations = generate_layout(&LayoutSpec::small()).unwrap().pick_station_count();
    let ub = throughput_upper_bound(stations, 10.0);
    let half = utrs(720.0, stations, 10.0);
    verdict(
        3,
        "throughput upper bound",
        ub == 1440.0 && half == 0.5,
        format!("{stations} pick stations, UB {ub}, 720 units/h -> {half}"),
    )
}

fn files_in(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism(plan: &ExperimentPlan) -> Verdict {
    let cell = plan.cells.iter().find(|c| c.id == "Small_N-U_activated").unwrap();
    let config = plan.scenario_config(cell, 0);
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut single = Duration::ZERO;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let t = Instant::now();
        let result = run(&config).unwrap();
        single = single.max(t.elapsed());
        let dir = tmp.path().join(format!("run-{k}"));
        write_run_artifacts(&result, &dir).unwrap();
        outputs.push((result.to_json(), files_in(&dir)));
    }
    let same_json = outputs[0].0 == outputs[1].0;
    let same_files = outputs[0].1 == outputs[1].1;
    let elapsed = start.elapsed();
    let budget = single.mul_f64(2.0 * DETERMINISM_SLACK);
    verdict(
        4,
        "determinism of results and exports",
        same_json && same_files && elapsed < budget,
        format!(
            "json identical {same_json}, {} files identical {same_files}, {elapsed:.2?} for both vs budget {budget:.2?}",
            outputs[0].1.len()
        ),
    )
}

struct Batch {
    plan: ExperimentPlan,
    /// Keyed by (cell id, repetition).
    results: BTreeMap<(String, usize), RunResult>,
    slowest: Duration,
}

fn run_batch(text: &str) -> Batch {
    let plan = parse_config(text).unwrap();
    let jobs: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.repetitions()).map(move |r| (c, r)))
        .collect();
    let done: Vec<_> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let t = Instant::now();
            let result = run(&plan.scenario_config(&plan.cells[c], r)).unwrap();
            ((plan.cells[c].id.clone(), r), result, t.elapsed())
        })
        .collect();
    let slowest = done.iter().map(|d| d.2).max().unwrap_or_default();
    let results = done.into_iter().map(|(k, r, _)| (k, r)).collect();
    Batch { plan, results, slowest }
}

impl Batch {
    fn utrs(&self, cell: &str) -> Vec<f64> {
        (0..self.plan.repetitions())
            .map(|r| self.results[&(cell.to_string(), r)].utrs)
            .collect()
    }

    fn mean_pct(&self, cell: &str) -> f64 {
        let v = self.utrs(cell);
        100.0 * v.iter().sum::<f64>() / v.len() as f64
    }
}

fn resorting_direction(batch: &Batch) -> Verdict {
    let mut pass = batch.slowest < RUN_BUDGET;
    let mut parts = Vec::new();
    for mech in ["N-U", "N-C"] {
        let off = batch.mean_pct(&format!("Small_{mech}_deactivated"));
        let on = batch.mean_pct(&format!("Small_{mech}_activated"));
        pass &= on >= off;
        parts.push(format!("{mech} {off:.3}% -> {on:.3}%"));
    }
    verdict(
        5,
        "nightly resorting does not lower throughput",
        pass,
        format!("{}, slowest run {:.2?}", parts.join(", "), batch.slowest),
    )
}

fn passive_indifference(batch: &Batch) -> Verdict {
    let off = batch.mean_pct("Small_C-C_deactivated");
    let on = batch.mean_pct("Small_C-C_activated");
    let delta = on - off;
    verdict(
        6,
        "cache passive policy indifferent to nightly resorting",
        delta.abs() <= INDIFFERENCE_TOLERANCE_PCT,
        format!("C-C {off:.3}% -> {on:.3}%, delta {delta:+.3} pp (limit {INDIFFERENCE_TOLERANCE_PCT} pp)"),
    )
}

fn reallocation_penalty() -> Verdict {
    let batch = run_batch(&format!(
        "layout = \"Small\"\nmechanism = \"N-C\"\nsetup = [\"R1P3A0\", \"R1P2A1\"]\n\
         horizon_hours = 24\nrepetitions = 3\nbase_seed = {BASE_SEED}\n"
    ));
    let full = batch.utrs("Small_N-C_R1P3A0");
    let fewer = batch.utrs("Small_N-C_R1P2A1");
    let pass = full.iter().zip(&fewer).all(|(a, b)| b < a);
    let pct = |v: &[f64]| {
        v.iter()
            .map(|u| format!("{:.2}", 100.0 * u))
            .collect::<Vec<_>>()
            .join("/")
    };
    verdict(
        7,
        "trading a picker for a repositioner costs throughput",
        pass,
        format!("R1P3A0 {}% vs R1P2A1 {}% per seed", pct(&full), pct(&fewer)),
    )
}

fn sortedness_at(result: &RunResult, t: f64) -> f64 {
    result
        .samples
        .iter()
        .find(|s| s.time_s == t)
        .map(|s| s.well_sortedness)
        .unwrap_or(f64::NAN)
}

fn night_descent(batch: &Batch) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in 0..batch.plan.repetitions() {
        let result = &batch.results[&("Small_N-U_activated".to_string(), r)];
        let evening = sortedness_at(result, 16.0 * HOUR);
        let morning = sortedness_at(result, 24.0 * HOUR);
        pass &= morning < evening;
        parts.push(format!("{evening:.2} -> {morning:.2}"));
    }
    verdict(
        8,
        "well-sortedness falls over the first night",
        pass,
        format!("22:00 -> 06:00 per seed: {}", parts.join(", ")),
    )
}

fn conservation(batch: &Batch) -> Verdict {
    let expected_samples = (48.0 * HOUR / 300.0) as usize + 1;
    let violations: usize = batch.results.values().map(|r| r.invariant_violations).sum();
    let short = batch
        .results
        .values()
        .filter(|r| r.samples.len() != expected_samples)
        .count();
    verdict(
        9,
        "conservation and placement invariants",
        violations == 0 && short == 0,
        format!(
            "{} runs of 48 h, {expected_samples} checked samples each, {violations} violations, {short} runs with missing samples",
            batch.results.len()
        ),
    )
}

fn utility_progress() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut failures = Vec::new();
    let mut steps = 0;
    for k in 0..FROZEN_INSTANCES {
        let mut f = Frozen::random(&mut rng);
        let mut error = f.rank_error();
        let mut finished = false;
        // each move lowers the error by at least one
        let limit = error;
        for _ in 0..=limit {
            match next_active_move(Mechanism::Utility, &f.world, &mut f.estimator, &f.state, &f.scores) {
                None => {
                    finished = true;
                    break;
                }
                Some(moves) => {
                    for m in moves {
                        f.apply(m.pod, m.to);
                    }
                    let next = f.rank_error();
                    if next >= error {
                        break;
                    }
                    error = next;
                    steps += 1;
                }
            }
        }
        if !finished {
            failures.push(k);
        }
    }
    verdict(
        10,
        "utility moves strictly reduce rank error and terminate",
        failures.is_empty(),
        format!("{FROZEN_INSTANCES} instances, {steps} moves, failing instances {failures:?}"),
    )
}

fn main() {
    let started = Instant::now();
    let mut verdicts = vec![sortedness_oracle(), path_time_oracle(), upper_bound()];

    let batch = run_batch(&format!(
        "layout = \"Small\"\nmechanism = [\"N-U\", \"N-C\", \"C-C\"]\nsetup = [\"deactivated\", \"activated\"]\n\
         horizon_hours = 48\nrepetitions = 3\nbase_seed = {BASE_SEED}\n"
    ));
    verdicts.push(determinism(&batch.plan));
    verdicts.push(resorting_direction(&batch));
    verdicts.push(passive_indifference(&batch));
    verdicts.push(reallocation_penalty());
    verdicts.push(night_descent(&batch));
    verdicts.push(conservation(&batch));
    verdicts.push(utility_progress());

    let mut failed = 0;
    for v in &verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}  {}: {}", v.number, v.name, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        verdicts.len() - failed,
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
