use rmfs_core::engine::{run, RobotSplit, ScenarioConfig, ScenarioKind, Simulation, HOUR};
use rmfs_core::harness::{export_time_series, time_series_csv};
use rmfs_core::policy::{MechanismConfig, MechanismPair};
use rmfs_core::world::LayoutSpec;

fn config(kind: ScenarioKind, mechanism: &str, hours: f64, seed: u64) -> ScenarioConfig {
    let pair: MechanismPair = mechanism.parse().unwrap();
    let mut c = ScenarioConfig::new(kind, LayoutSpec::small(), MechanismConfig::new(pair), seed);
    c.horizon = hours * HOUR;
    c
}

#[test]
fn same_seed_same_result() {
    let c = config(ScenarioKind::Parallel, "N-U", 3.0, 9);
    let a = run(&c).unwrap().to_json();
    let b = run(&c).unwrap().to_json();
    assert_eq!(a, b);
    let other = run(&config(ScenarioKind::Parallel, "N-U", 3.0, 10)).unwrap().to_json();
    assert_ne!(a, other);
}

#[test]
fn idle_night_leaves_pods_in_place() {
    let mut sim = Simulation::new(&config(ScenarioKind::DownPeriod, "N-none", 30.0, 4)).unwrap();
    sim.run_until(16.0 * HOUR).unwrap();
    let evening = sim.pod_locations();
    sim.run_until(24.0 * HOUR - 1e-6).unwrap();
    assert_eq!(sim.pod_locations(), evening);
}

#[test]
fn active_night_moves_pods() {
    let mut sim = Simulation::new(&config(ScenarioKind::DownPeriod, "N-U", 30.0, 4)).unwrap();
    sim.run_until(16.0 * HOUR).unwrap();
    let evening = sim.pod_locations();
    sim.run_until(24.0 * HOUR - 1e-6).unwrap();
    assert_ne!(sim.pod_locations(), evening);
}

#[test]
fn afternoon_replenishment_tops_up_to_target() {
    let mut sim = Simulation::new(&config(ScenarioKind::DownPeriod, "N-none", 12.0, 5)).unwrap();
    let at = 10.0 * HOUR;
    sim.run_until(at - 1e-7).unwrap();
    let w = sim.world();
    let outstanding: u64 = w.replenishment_orders.values().map(|o| o.remaining() as u64).sum();
    let before = w.replenishment_orders.len();
    let target = 0.75 * w.total_capacity() as f64;
    let missing = target - w.total_units() as f64 - outstanding as f64;
    let units = w.total_units();
    sim.run_until(at).unwrap();
    let w = sim.world();
    assert_eq!(w.total_units(), units, "no unit moved at the same instant");
    let expected = if missing > 0.0 {
        (missing / 20.0).ceil() as usize
    } else {
        0
    };
    assert!(expected > 0, "a day of picking leaves room to refill");
    assert_eq!(w.replenishment_orders.len() - before, expected);
    let promised = w.total_units() as f64
        + w.replenishment_orders
            .values()
            .map(|o| o.remaining() as f64)
            .sum::<f64>();
    assert!(promised >= target && promised < target + 20.0);
}

#[test]
fn sorting_night_lifts_scores_near_stations() {
    let c = config(ScenarioKind::DownPeriod, "N-U", 24.5, 6);
    let sim = Simulation::new(&c).unwrap();
    let prominence = sim.policy_state().prominence.values().to_vec();
    let tiles: Vec<_> = sim.world().locations.iter().map(|l| l.tile).collect();
    let result = sim.run().unwrap();
    assert_eq!(result.heatmaps.len(), 2);
    let (before, after) = (&result.heatmaps[0], &result.heatmaps[1]);
    assert_eq!((before.time_s, after.time_s), (16.0 * HOUR, 24.0 * HOUR));
    assert_eq!(before.cells.len(), tiles.len());

    let mut order: Vec<usize> = (0..prominence.len()).collect();
    order.sort_by(|&a, &b| prominence[a].total_cmp(&prominence[b]));
    let top = &order[..prominence.len() / 10];
    let mean = |g: &rmfs_core::engine::result::HeatmapGrid| {
        top.iter()
            .map(|&i| g.get(tiles[i].row, tiles[i].col).unwrap_or(0.0))
            .sum::<f64>()
            / top.len() as f64
    };
    assert!(mean(after) > mean(before), "{} vs {}", mean(after), mean(before));
}

#[test]
fn night_sortedness_mostly_non_increasing() {
    let result = run(&config(ScenarioKind::DownPeriod, "N-U", 24.0, 7)).unwrap();
    let night: Vec<f64> = result
        .samples
        .iter()
        .filter(|s| s.time_s >= 17.0 * HOUR && s.time_s <= 24.0 * HOUR)
        .map(|s| s.well_sortedness)
        .collect();
    let steps = night.len() - 1;
    let down = night.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down as f64 >= 0.8 * steps as f64, "{down} of {steps}");
}

#[test]
fn time_series_has_one_row_per_sample() {
    let result = run(&config(ScenarioKind::Parallel, "C-C", 2.0, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    export_time_series(&result, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), result.samples.len() + 1);
    assert!(text.ends_with('\n'));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 5));
    export_time_series(&result, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert_eq!(time_series_csv(&result.samples), text);
    assert!(export_time_series(&result, &dir.path().join("missing/ts.csv")).is_err());
}

#[test]
fn no_pods_or_no_orders_means_no_throughput() {
    let mut c = config(ScenarioKind::Parallel, "N-U", 2.0, 3);
    c.layout.pods = 0;
    let r = run(&c).unwrap();
    assert_eq!((r.utrs, r.totals.units_picked), (0.0, 0));

    let mut c = config(ScenarioKind::DownPeriod, "N-U", 30.0, 3);
    c.params.customer_backlog = 0;
    c.params.night_orders_per_station = 0;
    let r = run(&c).unwrap();
    assert_eq!((r.utrs, r.totals.units_picked), (0.0, 0));
    assert_eq!(r.invariant_violations, 0);
}

#[test]
fn extra_repositioner_per_pick_station() {
    let robots = |split| {
        let mut c = config(ScenarioKind::Parallel, "N-C", 1.0, 1);
        c.robot_split = split;
        Simulation::new(&c).unwrap().world().robots.len()
    };
    let stations = LayoutSpec::small().pick_stations;
    assert_eq!(robots(RobotSplit::R1P3A0), 4 * stations);
    assert_eq!(robots(RobotSplit::R1P3A1) - robots(RobotSplit::R1P3A0), stations);
    assert_eq!(robots(RobotSplit::R1P2A1), robots(RobotSplit::R1P3A0));
}

#[test]
fn parallel_run_keeps_invariants() {
    let r = run(&config(ScenarioKind::Parallel, "U-U", 6.0, 8)).unwrap();
    assert_eq!(r.invariant_violations, 0, "{:?}", r.violation_examples);
    assert!(r.totals.units_picked > 0 && r.totals.units_replenished > 0);
    assert_eq!(r.active_hours, 6.0);
    let handled: u64 = r.totals.station_units.iter().sum();
    assert_eq!(handled, r.totals.units_picked + r.totals.units_replenished);
}
