use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rmfs_core::engine::{ScenarioConfig, ScenarioKind, Simulation, HOUR};
use rmfs_core::ids::NodeId;
use rmfs_core::layout::generate_layout;
use rmfs_core::pathtime::{PathTimeEstimator, PathTimeParams};
use rmfs_core::policy::{MechanismConfig, MechanismPair};
use rmfs_core::scoring::world_well_sortedness;
use rmfs_core::world::LayoutSpec;
use std::hint::black_box;

fn config(mechanism: &str) -> ScenarioConfig {
    let pair: MechanismPair = mechanism.parse().unwrap();
    ScenarioConfig::new(
        ScenarioKind::DownPeriod,
        LayoutSpec::small(),
        MechanismConfig::new(pair),
        1,
    )
}

fn path_time(c: &mut Criterion) {
    let world = generate_layout(&LayoutSpec::long()).unwrap();
    let n = world.graph.node_count();
    // fixed spread of pairs across the grid
    let pairs: Vec<(NodeId, NodeId)> = (0..64)
        .map(|i| {
            (
                NodeId::from_index(i * 37 % n),
                NodeId::from_index((i * 101 + n / 2) % n),
            )
        })
        .collect();
    c.bench_function("path_time/long_64_pairs_uncached", |b| {
        let mut est = PathTimeEstimator::new(world.graph.clone(), PathTimeParams::default());
        b.iter(|| {
            for &(a, z) in &pairs {
                black_box(est.path_time_uncached(a, z));
            }
        })
    });
    c.bench_function("path_time/long_times_from", |b| {
        b.iter_batched(
            || PathTimeEstimator::new(world.graph.clone(), PathTimeParams::default()),
            |mut est| black_box(est.times_from(pairs[0].0)),
            BatchSize::SmallInput,
        )
    });
}

fn well_sortedness(c: &mut Criterion) {
    let mut sim = Simulation::new(&config("N-U")).unwrap();
    let scores = sim.scores().clone();
    let ranks = sim.policy_state().ranks.clone();
    c.bench_function("well_sortedness/small_initial", |b| {
        b.iter(|| black_box(world_well_sortedness(sim.world(), &ranks, &scores)))
    });
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    for mech in ["N-none", "N-U"] {
        let mut cfg = config(mech);
        cfg.horizon = 2.0 * HOUR;
        group.bench_function(format!("small_2h_{mech}"), |b| {
            b.iter(|| black_box(rmfs_core::engine::run(&cfg).unwrap().utrs))
        });
    }
    group.finish();
}

criterion_group!(benches, path_time, well_sortedness, simulation);
criterion_main!(benches);
