//! Pod repositioning mechanisms.
//!
//! Each mechanism has a passive variant, choosing where a pod returning from
//! a station is stored, and (except Nearest) an active variant that proposes
//! explicit moves of stored pods:
//!
//! * **Nearest (N)**: closest free location by estimated travel time.
//! * **Cache (C)**: the most prominent fraction of locations is a cache
//!   reserved for pods whose combined score reaches a threshold. Actively,
//!   high-score pods outside are swapped with low-score pods inside.
//! * **Utility (U)**: pods are mapped onto location ranks by combined score.
//!   Passively, the closest free location near the desired rank is used;
//!   actively, the pod furthest from its desired rank is moved closer.

use crate::error::PolicyError;
use crate::ids::{LocationId, NodeId, PodId};
use crate::pathtime::{PathTimeEstimator, ProminenceField};
use crate::scoring::{compute_ranks, RankTable, ScoreBoard, ScoringWeights};
use crate::world::World;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "N")]
    Nearest,
    #[serde(rename = "C")]
    Cache,
    #[serde(rename = "U")]
    Utility,
}

impl Mechanism {
    pub fn letter(self) -> char {
        match self {
            Mechanism::Nearest => 'N',
            Mechanism::Cache => 'C',
            Mechanism::Utility => 'U',
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "N" | "n" | "nearest" | "Nearest" => Some(Mechanism::Nearest),
            "C" | "c" | "cache" | "Cache" => Some(Mechanism::Cache),
            "U" | "u" | "utility" | "Utility" => Some(Mechanism::Utility),
            _ => None,
        }
    }
}

/// Passive and active mechanism, written as in `N-U` (passive first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MechanismPair {
    pub passive: Mechanism,
    pub active: Option<Mechanism>,
}

impl fmt::Display for MechanismPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.active {
            Some(a) => write!(f, "{}-{}", self.passive.letter(), a.letter()),
            None => write!(f, "{}-none", self.passive.letter()),
        }
    }
}

impl FromStr for MechanismPair {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = |why: &str| PolicyError::InvalidMechanism(s.to_string(), why.to_string());
        let (p, a) = match s.split_once('-') {
            Some((p, a)) => (p, Some(a)),
            None => (s, None),
        };
        let passive = Mechanism::parse(p).ok_or_else(|| invalid("passive part must be N, C or U"))?;
        let active = match a.map(str::trim) {
            None | Some("none") | Some("0") => None,
            Some(a) => match Mechanism::parse(a) {
                Some(Mechanism::Nearest) => {
                    return Err(invalid(
                        "Nearest has no active variant; active part must be C, U or none",
                    ))
                }
                Some(m) => Some(m),
                None => return Err(invalid("active part must be C, U or none")),
            },
        };
        Ok(Self { passive, active })
    }
}

impl Serialize for MechanismPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MechanismPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub passive: Mechanism,
    pub active: Option<Mechanism>,
    pub cache_fraction: f64,
    pub weights: ScoringWeights,
}

impl MechanismConfig {
    pub fn new(pair: MechanismPair) -> Self {
        Self {
            passive: pair.passive,
            active: pair.active,
            cache_fraction: 0.25,
            weights: ScoringWeights::default(),
        }
    }

    pub fn pair(&self) -> MechanismPair {
        MechanismPair {
            passive: self.passive,
            active: self.active,
        }
    }
}

/// The most prominent locations plus the current score threshold for entry.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheSet {
    members: Vec<bool>,
    size: usize,
    pub threshold: f64,
}

impl CacheSet {
    /// Takes the `round(fraction * n)` lowest-prominence locations (ties by id).
    pub fn from_prominence(field: &ProminenceField, fraction: f64) -> Self {
        let n = field.len();
        let size = ((fraction * n as f64).round() as usize).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let v = field.values();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        let mut members = vec![false; n];
        for &i in &order[..size] {
            members[i] = true;
        }
        Self {
            members,
            size,
            threshold: f64::INFINITY,
        }
    }

    #[inline]
    pub fn contains(&self, location: LocationId) -> bool {
        self.members[location.index()]
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn locations(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| LocationId::from_index(i))
    }
}

/// Combined score of the `cache_size`-th best pod; every pod at or above it
/// belongs in the cache. Infinite for an empty cache.
pub fn compute_cache_threshold(scores: &[f64], cache_size: usize) -> f64 {
    if cache_size == 0 || scores.is_empty() {
        return f64::INFINITY;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[cache_size.min(sorted.len()) - 1]
}

/// Maps pods onto location ranks proportionally to their position when sorted
/// by combined score (descending, ties by pod id). Indexed by pod id.
pub fn desired_ranks(scores: &[f64], max_rank: u32) -> Vec<u32> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut desired = vec![0; n];
    for (pos, pod) in order.into_iter().enumerate() {
        desired[pod] = 1 + ((pos as u64 * max_rank as u64) / n as u64) as u32;
    }
    desired
}

/// Static location data shared by all mechanisms.
#[derive(Clone, Debug)]
pub struct PolicyState {
    pub prominence: ProminenceField,
    pub ranks: RankTable,
    pub cache: CacheSet,
}

impl PolicyState {
    pub fn new(prominence: ProminenceField, cache_fraction: f64) -> Self {
        let ranks = compute_ranks(&prominence);
        let cache = CacheSet::from_prominence(&prominence, cache_fraction);
        Self {
            prominence,
            ranks,
            cache,
        }
    }

    pub fn refresh_threshold(&mut self, scores: &ScoreBoard) {
        self.cache.threshold = compute_cache_threshold(scores.combined_all(), self.cache.len());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepositioningMove {
    pub pod: PodId,
    pub from: LocationId,
    pub to: LocationId,
    /// Rank-offset reduction (Utility) or score difference (Cache).
    pub gain: f64,
}

fn nearest_available<F>(world: &World, times: &[f64], filter: F) -> Option<LocationId>
where
    F: Fn(LocationId) -> bool,
{
    world
        .locations
        .iter()
        .filter(|l| l.is_available() && filter(l.id))
        .map(|l| (times[l.waypoint.index()], l.id))
        .filter(|(t, _)| t.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Storage location for `pod` released at `release`.
pub fn choose_passive_location(
    mechanism: &MechanismConfig,
    pod: PodId,
    release: NodeId,
    world: &World,
    estimator: &mut PathTimeEstimator,
    state: &PolicyState,
    scores: &ScoreBoard,
) -> Result<LocationId, PolicyError> {
    let times = estimator.times_from(release);
    let chosen = match mechanism.passive {
        Mechanism::Nearest => nearest_available(world, &times, |_| true),
        Mechanism::Cache => {
            let to_cache = scores.combined(pod) >= state.cache.threshold;
            let preferred = nearest_available(world, &times, |l| state.cache.contains(l) == to_cache);
            preferred.or_else(|| nearest_available(world, &times, |l| state.cache.contains(l) != to_cache))
        }
        Mechanism::Utility => {
            let desired = desired_ranks(scores.combined_all(), state.ranks.max_rank())[pod.index()];
            let offset = |l: LocationId| state.ranks.rank(l).abs_diff(desired);
            let closest = world
                .locations
                .iter()
                .filter(|l| l.is_available() && times[l.waypoint.index()].is_finite())
                .map(|l| offset(l.id))
                .min();
            closest.and_then(|closest| {
                let window = closest.max(1);
                nearest_available(world, &times, |l| offset(l) <= window)
            })
        }
    };
    chosen.ok_or(PolicyError::NoFreeLocation)
}

/// Pods that may be moved right now: stored, not promised to any robot and
/// not sharing their location with a robot.
fn movable(world: &World) -> impl Iterator<Item = (PodId, LocationId)> + '_ {
    world.pods.iter().filter_map(move |p| {
        let loc = p.stored_at()?;
        (p.reserved_by.is_none() && world.location(loc).claim.is_none()).then_some((p.id, loc))
    })
}

/// Next active repositioning step, or `None` when no move improves the
/// inventory. Cache swaps come back as two moves to execute in order.
pub fn next_active_move(
    active: Mechanism,
    world: &World,
    estimator: &mut PathTimeEstimator,
    state: &PolicyState,
    scores: &ScoreBoard,
) -> Option<Vec<RepositioningMove>> {
    match active {
        Mechanism::Nearest => None,
        Mechanism::Utility => next_utility_move(world, estimator, state, scores).map(|m| vec![m]),
        Mechanism::Cache => next_cache_swap(world, estimator, state, scores),
    }
}

fn next_utility_move(
    world: &World,
    estimator: &mut PathTimeEstimator,
    state: &PolicyState,
    scores: &ScoreBoard,
) -> Option<RepositioningMove> {
    let desired = desired_ranks(scores.combined_all(), state.ranks.max_rank());
    let mut candidates: Vec<(u32, PodId, LocationId)> = movable(world)
        .map(|(pod, loc)| (state.ranks.rank(loc).abs_diff(desired[pod.index()]), pod, loc))
        .filter(|&(diff, _, _)| diff > 0)
        .collect();
    candidates.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(scores.combined(b.1).total_cmp(&scores.combined(a.1)))
            .then(a.1.cmp(&b.1))
    });
    let free: Vec<(LocationId, u32)> = world
        .locations
        .iter()
        .filter(|l| l.is_available())
        .map(|l| (l.id, state.ranks.rank(l.id)))
        .collect();
    for (diff, pod, from) in candidates {
        let want = desired[pod.index()];
        let best = free.iter().map(|&(_, r)| r.abs_diff(want)).min()?;
        if best >= diff {
            continue;
        }
        let times = estimator.times_from(world.location(from).waypoint);
        let to = free
            .iter()
            .filter(|&&(_, r)| r.abs_diff(want) == best)
            .map(|&(l, _)| (times[world.location(l).waypoint.index()], l))
            .filter(|(t, _)| t.is_finite())
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, to)) = to {
            return Some(RepositioningMove {
                pod,
                from,
                to,
                gain: (diff - best) as f64,
            });
        }
    }
    None
}

fn next_cache_swap(
    world: &World,
    estimator: &mut PathTimeEstimator,
    state: &PolicyState,
    scores: &ScoreBoard,
) -> Option<Vec<RepositioningMove>> {
    let threshold = state.cache.threshold;
    let by_score = |a: &(PodId, LocationId), b: &(PodId, LocationId)| {
        scores
            .combined(a.0)
            .total_cmp(&scores.combined(b.0))
            .then(b.0.cmp(&a.0))
    };
    let outside = movable(world)
        .filter(|&(p, l)| !state.cache.contains(l) && scores.combined(p) >= threshold)
        .max_by(by_score)?;
    let (pod, from) = outside;
    let times = estimator.times_from(world.location(from).waypoint);
    if let Some(to) = nearest_available(world, &times, |l| state.cache.contains(l)) {
        return Some(vec![RepositioningMove {
            pod,
            from,
            to,
            gain: scores.combined(pod) - threshold,
        }]);
    }
    let (victim, victim_loc) = movable(world)
        .filter(|&(p, l)| state.cache.contains(l) && scores.combined(p) < threshold)
        .min_by(|a, b| {
            scores
                .combined(a.0)
                .total_cmp(&scores.combined(b.0))
                .then(a.0.cmp(&b.0))
        })?;
    if scores.combined(pod) <= scores.combined(victim) {
        return None;
    }
    let victim_times = estimator.times_from(world.location(victim_loc).waypoint);
    let buffer = nearest_available(world, &victim_times, |l| !state.cache.contains(l))?;
    let gain = scores.combined(pod) - scores.combined(victim);
    Some(vec![
        RepositioningMove {
            pod: victim,
            from: victim_loc,
            to: buffer,
            gain,
        },
        RepositioningMove {
            pod,
            from,
            to: victim_loc,
            gain,
        },
    ])
}
