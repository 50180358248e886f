//! Pod and storage location scores: pod speed, pod utility, the combined
//! score, location ranks, inventory well-sortedness and the unit throughput
//! rate score.

use crate::error::ScoringError;
use crate::ids::{LocationId, PodId};
use crate::pathtime::ProminenceField;
use crate::world::{Pod, SkuCatalog, World};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringWeights {
    pub speed: f64,
    pub utility: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        Self {
            speed: 1.0,
            utility: 1.0,
        }
    }
}

impl ScoringWeights {
    pub fn is_valid(&self) -> bool {
        self.speed >= 0.0 && self.utility >= 0.0 && self.speed + self.utility > 0.0
    }
}

/// Frequency-weighted count of the units in a pod.
pub fn pod_speed(pod: &Pod, catalog: &SkuCatalog) -> f64 {
    pod.inventory
        .iter()
        .map(|(&sku, &n)| n as f64 * catalog.frequency(sku))
        .sum()
}

/// Picks the pod could serve against the current backlog demand.
pub fn pod_utility(pod: &Pod, demand: &[u64]) -> f64 {
    pod.inventory
        .iter()
        .map(|(&sku, &n)| (n as u64).min(demand[sku.index()]))
        .sum::<u64>() as f64
}

/// Speed, utility and combined score of every pod at one instant.
#[derive(Clone, Debug, Default)]
pub struct ScoreBoard {
    pub speeds: Vec<f64>,
    pub utilities: Vec<f64>,
    pub max_speed: f64,
    pub max_utility: f64,
    combined: Vec<f64>,
}

impl ScoreBoard {
    /// Evaluates every pod. A zero maximum makes its term contribute zero.
    pub fn new(pods: &[Pod], catalog: &SkuCatalog, demand: &[u64], weights: ScoringWeights) -> Self {
        let speeds: Vec<f64> = pods.iter().map(|p| pod_speed(p, catalog)).collect();
        let utilities: Vec<f64> = pods.iter().map(|p| pod_utility(p, demand)).collect();
        Self::from_parts(speeds, utilities, weights)
    }

    pub fn from_parts(speeds: Vec<f64>, utilities: Vec<f64>, weights: ScoringWeights) -> Self {
        let max_speed = speeds.iter().copied().fold(0.0, f64::max);
        let max_utility = utilities.iter().copied().fold(0.0, f64::max);
        let term = |v: f64, max: f64, w: f64| if max > 0.0 { v / max * w } else { 0.0 };
        let combined = speeds
            .iter()
            .zip(&utilities)
            .map(|(&s, &u)| term(s, max_speed, weights.speed) + term(u, max_utility, weights.utility))
            .collect();
        Self {
            speeds,
            utilities,
            max_speed,
            max_utility,
            combined,
        }
    }

    pub fn for_world(world: &World, weights: ScoringWeights) -> Self {
        Self::new(&world.pods, &world.catalog, world.demand_vector(), weights)
    }

    #[inline]
    pub fn combined(&self, pod: PodId) -> f64 {
        self.combined[pod.index()]
    }

    pub fn combined_all(&self) -> &[f64] {
        &self.combined
    }

    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }
}

/// Combined score of `pod` relative to all pods, erroring when every pod is empty.
pub fn combined_score(
    pod: PodId,
    pods: &[Pod],
    catalog: &SkuCatalog,
    demand: &[u64],
    weights: ScoringWeights,
) -> Result<f64, ScoringError> {
    if pods.iter().all(Pod::is_empty) {
        return Err(ScoringError::AllPodsEmpty);
    }
    Ok(ScoreBoard::new(pods, catalog, demand, weights).combined(pod))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub location: LocationId,
    pub prominence: f64,
    pub rank: u32,
}

/// Storage locations sorted by prominence with dense ranks starting at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    entries: Vec<RankEntry>,
    rank_of: Vec<u32>,
}

impl RankTable {
    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn rank(&self, location: LocationId) -> u32 {
        self.rank_of[location.index()]
    }

    pub fn max_rank(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.rank)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sorts locations by prominence (ties by id) and assigns ranks that grow by
/// one at every strict prominence increase.
pub fn compute_ranks(field: &ProminenceField) -> RankTable {
    let mut order: Vec<usize> = (0..field.len()).collect();
    let values = field.values();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut entries = Vec::with_capacity(order.len());
    let mut rank_of = vec![0; order.len()];
    let mut rank = 1;
    let mut last = order.first().map(|&i| values[i]);
    for i in order {
        let p = values[i];
        if let Some(prev) = last {
            if p > prev {
                rank += 1;
                last = Some(p);
            }
        }
        rank_of[i] = rank;
        entries.push(RankEntry {
            location: LocationId::from_index(i),
            prominence: p,
            rank,
        });
    }
    RankTable { entries, rank_of }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WellSortednessReport {
    /// Misplaced pairs.
    pub misplacements: u64,
    /// Sum of rank offsets over misplaced pairs.
    pub offset_sum: u64,
    /// Average offset; zero when nothing is misplaced.
    pub average: f64,
}

/// Counts ordered pairs of occupied locations of different rank where the pod
/// at the more prominent location scores lower than the pod at the other.
///
/// `score_at` yields the combined score of the pod stored at a location, or
/// `None` when the location is empty.
pub fn well_sortedness<F>(ranks: &RankTable, score_at: F) -> WellSortednessReport
where
    F: Fn(LocationId) -> Option<f64>,
{
    let occupied: Vec<(u32, f64)> = ranks
        .entries()
        .iter()
        .filter_map(|e| score_at(e.location).map(|s| (e.rank, s)))
        .collect();
    let mut c = 0u64;
    let mut d = 0u64;
    for (i, &(r1, s1)) in occupied.iter().enumerate() {
        for &(r2, s2) in &occupied[i + 1..] {
            if r1 != r2 && s1 < s2 {
                c += 1;
                d += (r2 - r1) as u64;
            }
        }
    }
    WellSortednessReport {
        misplacements: c,
        offset_sum: d,
        average: if c == 0 { 0.0 } else { d as f64 / c as f64 },
    }
}

/// Well-sortedness of the stored pods of `world` under `scores`.
pub fn world_well_sortedness(world: &World, ranks: &RankTable, scores: &ScoreBoard) -> WellSortednessReport {
    well_sortedness(ranks, |loc| {
        world.locations[loc.index()].occupant.map(|pod| scores.combined(pod))
    })
}

/// Units per hour the pick stations could handle at most.
pub fn throughput_upper_bound(pick_stations: usize, pick_unit_time: f64) -> f64 {
    pick_stations as f64 * 3600.0 / pick_unit_time
}

/// Average picked units per active hour as a fraction of the upper bound.
pub fn utrs(units_per_active_hour: f64, pick_stations: usize, pick_unit_time: f64) -> f64 {
    let bound = throughput_upper_bound(pick_stations, pick_unit_time);
    if bound > 0.0 {
        units_per_active_hour / bound
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{RobotId, SkuId};
    use crate::world::Placement;

    fn pod(id: u32, contents: &[(u32, u32)]) -> Pod {
        let mut p = Pod::new(PodId(id), 100, Placement::Carried(RobotId(0)));
        for &(sku, n) in contents {
            p.add(SkuId(sku), n).unwrap();
        }
        p
    }

    #[test]
    fn speed_examples() {
        let catalog = SkuCatalog::new(vec![0.5, 0.1, 0.4]).unwrap();
        assert_eq!(pod_speed(&pod(0, &[]), &catalog), 0.0);
        let p = pod(0, &[(0, 3), (1, 2)]);
        assert!((pod_speed(&p, &catalog) - 1.7).abs() < 1e-12);
        let doubled = pod(1, &[(0, 6), (1, 4)]);
        assert!((pod_speed(&doubled, &catalog) - 2.0 * pod_speed(&p, &catalog)).abs() < 1e-12);
    }

    #[test]
    fn utility_examples() {
        let p = pod(0, &[(1, 3)]);
        assert_eq!(pod_utility(&p, &[0, 0, 0]), 0.0);
        assert_eq!(pod_utility(&p, &[0, 1, 0]), 1.0);
        let q = pod(0, &[(1, 2), (2, 5)]);
        assert_eq!(pod_utility(&q, &[0, 9, 4]), 6.0);
    }

    #[test]
    fn combined_examples() {
        let w = ScoringWeights::default();
        let board = ScoreBoard::from_parts(vec![2.0, 4.0, 1.0], vec![0.0, 5.0, 5.0], w);
        assert!((board.combined(PodId(0)) - 0.5).abs() < 1e-12);
        assert!((board.combined(PodId(1)) - 2.0).abs() < 1e-12);
        let with_empty = ScoreBoard::from_parts(vec![0.0, 4.0], vec![0.0, 5.0], w);
        assert_eq!(with_empty.combined(PodId(0)), 0.0);
    }

    #[test]
    fn combined_guards_zero_maxima() {
        let catalog = SkuCatalog::uniform(2);
        let pods = vec![pod(0, &[]), pod(1, &[])];
        assert_eq!(
            combined_score(PodId(0), &pods, &catalog, &[0, 0], ScoringWeights::default()),
            Err(ScoringError::AllPodsEmpty)
        );
        // no demand: utility term vanishes, speed term still normalizes
        let pods = vec![pod(0, &[(0, 1)]), pod(1, &[(0, 2)])];
        let s = combined_score(PodId(1), &pods, &catalog, &[0, 0], ScoringWeights::default()).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn ranks_examples() {
        let t = compute_ranks(&ProminenceField::from_values(vec![10.0, 10.0, 20.0]));
        assert_eq!(t.entries().iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 1, 2]);
        let t = compute_ranks(&ProminenceField::from_values(vec![7.0; 5]));
        assert!(t.entries().iter().all(|e| e.rank == 1));
        let t = compute_ranks(&ProminenceField::from_values(vec![3.0, 1.0, 2.0]));
        assert_eq!(t.rank(LocationId(1)), 1);
        assert_eq!(t.rank(LocationId(2)), 2);
        assert_eq!(t.rank(LocationId(0)), 3);
        assert_eq!(t.max_rank(), 3);
    }

    #[test]
    fn well_sortedness_hand_trace() {
        let t = compute_ranks(&ProminenceField::from_values(vec![10.0, 10.0, 20.0]));
        let scores = [0.2, 0.9, 0.5];
        let r = well_sortedness(&t, |l| Some(scores[l.index()]));
        assert_eq!(
            r,
            WellSortednessReport {
                misplacements: 1,
                offset_sum: 1,
                average: 1.0
            }
        );
    }

    #[test]
    fn well_sorted_inventory_reports_zero() {
        let t = compute_ranks(&ProminenceField::from_values(vec![1.0, 2.0, 3.0, 4.0]));
        let scores = [0.9, 0.9, 0.5, 0.1];
        let r = well_sortedness(&t, |l| Some(scores[l.index()]));
        assert_eq!(r, WellSortednessReport::default());
    }

    #[test]
    fn empty_locations_are_skipped() {
        let t = compute_ranks(&ProminenceField::from_values(vec![1.0, 2.0, 3.0]));
        let scores = [None, Some(0.1), Some(0.9)];
        let r = well_sortedness(&t, |l| scores[l.index()]);
        assert_eq!(r.misplacements, 1);
        assert_eq!(r.offset_sum, 1);
    }

    #[test]
    fn upper_bound_and_utrs() {
        assert_eq!(throughput_upper_bound(4, 10.0), 1440.0);
        assert_eq!(utrs(720.0, 4, 10.0), 0.5);
        assert_eq!(utrs(0.0, 4, 10.0), 0.0);
    }
}
