#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rmfs_core::graph::WaypointGraph;
use rmfs_core::ids::{LocationId, NodeId, PodId};
use rmfs_core::layout::generate_layout;
use rmfs_core::pathtime::{compute_prominence_field, PathTimeEstimator, PathTimeParams};
use rmfs_core::policy::{desired_ranks, PolicyState};
use rmfs_core::scoring::{ScoreBoard, ScoringWeights};
use rmfs_core::world::{LayoutSpec, Placement, World};
use std::collections::VecDeque;

/// Shortest travel time by queue-based label correcting, ignoring turns.
pub fn label_correcting(graph: &WaypointGraph, from: NodeId, speed: f64) -> Vec<f64> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::from([from]);
    dist[from.index()] = 0.0;
    queued[from.index()] = true;
    while let Some(u) = queue.pop_front() {
        queued[u.index()] = false;
        for e in graph.edges(u) {
            let d = dist[u.index()] + e.length / speed;
            if d < dist[e.to.index()] {
                dist[e.to.index()] = d;
                if !queued[e.to.index()] {
                    queued[e.to.index()] = true;
                    queue.push_back(e.to);
                }
            }
        }
    }
    dist
}

/// Dense prominence ranks, 1 for the smallest value.
pub fn dense_ranks(prominence: &[f64]) -> Vec<u32> {
    let mut distinct = prominence.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    prominence
        .iter()
        .map(|p| 1 + distinct.iter().position(|d| d == p).unwrap() as u32)
        .collect()
}

/// Pair enumeration straight from the definition: `(misplaced, offset sum)`.
pub fn brute_force_sortedness(prominence: &[f64], scores: &[Option<f64>]) -> (u64, u64) {
    let ranks = dense_ranks(prominence);
    let (mut c, mut d) = (0, 0);
    for i in 0..prominence.len() {
        for j in 0..prominence.len() {
            if let (Some(si), Some(sj)) = (scores[i], scores[j]) {
                if ranks[i] < ranks[j] && si < sj {
                    c += 1;
                    d += (ranks[j] - ranks[i]) as u64;
                }
            }
        }
    }
    (c, d)
}

pub fn tiny_spec<R: Rng>(rng: &mut R) -> LayoutSpec {
    LayoutSpec {
        name: "tiny".into(),
        pick_stations: rng.random_range(1..=2),
        replenish_stations: 1,
        aisles_horizontal: rng.random_range(1..=2),
        aisles_vertical: rng.random_range(1..=2),
        pods: 0,
    }
}

/// Tiny layout with randomly placed pods, random scores and a fixed policy
/// state. Leaves at least one location free.
pub struct Frozen {
    pub world: World,
    pub estimator: PathTimeEstimator,
    pub state: PolicyState,
    pub scores: ScoreBoard,
}

impl Frozen {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut spec = tiny_spec(rng);
        let locations = spec.storage_location_count();
        spec.pods = rng.random_range(1..locations);
        let mut world = generate_layout(&spec).unwrap();
        for l in &mut world.locations {
            l.occupant = None;
        }
        let mut spots: Vec<usize> = (0..locations).collect();
        spots.shuffle(rng);
        for (pod, &spot) in spots.iter().take(spec.pods).enumerate() {
            world.store_pod(PodId(pod as u32), LocationId(spot as u32));
        }
        // coarse values so that ties occur
        let speeds = (0..spec.pods).map(|_| rng.random_range(0..8) as f64).collect();
        let utilities = (0..spec.pods).map(|_| rng.random_range(0..8) as f64).collect();
        let scores = ScoreBoard::from_parts(speeds, utilities, ScoringWeights::default());
        let mut estimator = PathTimeEstimator::new(world.graph.clone(), PathTimeParams::default());
        let field = compute_prominence_field(&mut estimator, &world).unwrap();
        let mut state = PolicyState::new(field, 0.25);
        state.refresh_threshold(&scores);
        Self {
            world,
            estimator,
            state,
            scores,
        }
    }

    pub fn apply(&mut self, pod: PodId, to: LocationId) {
        let Placement::Stored(from) = self.world.pods[pod.index()].placement else {
            panic!("{pod} is not stored");
        };
        self.world.locations[from.index()].occupant = None;
        self.world.store_pod(pod, to);
    }

    /// Sum over stored pods of |rank of location - desired rank|.
    pub fn rank_error(&self) -> u64 {
        let desired = desired_ranks(self.scores.combined_all(), self.state.ranks.max_rank());
        self.world
            .pods
            .iter()
            .filter_map(|p| {
                p.stored_at()
                    .map(|l| self.state.ranks.rank(l).abs_diff(desired[p.id.index()]) as u64)
            })
            .sum()
    }
}
