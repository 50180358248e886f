//! Turn-aware travel time estimation and storage location prominence.
//!
//! Travel time along a path is `length / cruise_speed` plus a fixed penalty
//! per 90 degree heading change (a reversal counts twice). The search runs over
//! `(node, incoming heading)` states so that turn costs are exact; the start
//! state carries no heading, so the first edge is never penalized.

use crate::error::ScoringError;
use crate::graph::{Heading, WaypointGraph};
use crate::ids::{LocationId, NodeId};
use crate::world::World;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathTimeParams {
    /// m/s
    pub cruise_speed: f64,
    /// Seconds per 90 degree heading change.
    pub turn_penalty: f64,
}

impl Default for PathTimeParams {
    fn default() -> Self {
        Self {
            cruise_speed: 1.5,
            turn_penalty: 2.5,
        }
    }
}

/// A planned route and its estimated travel time.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub time: f64,
}

const NO_HEADING: usize = 4;
const STATES_PER_NODE: usize = 5;

#[derive(Clone, Copy)]
struct Label {
    length: f64,
    turns: u32,
    parent: u32,
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    priority: f64,
    state: u32,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on priority, then on state index for determinism
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable search buffers, reset lazily via a generation stamp.
#[derive(Clone, Default)]
struct Scratch {
    labels: Vec<Label>,
    stamp: Vec<u32>,
    closed: Vec<u32>,
    generation: u32,
}

impl Scratch {
    fn reset(&mut self, states: usize) {
        if self.stamp.len() != states {
            self.labels = vec![
                Label {
                    length: 0.0,
                    turns: 0,
                    parent: u32::MAX
                };
                states
            ];
            self.stamp = vec![0; states];
            self.closed = vec![0; states];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.closed.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    #[inline]
    fn label(&self, s: usize) -> Option<&Label> {
        (self.stamp[s] == self.generation).then(|| &self.labels[s])
    }

    #[inline]
    fn set(&mut self, s: usize, l: Label) {
        self.stamp[s] = self.generation;
        self.labels[s] = l;
    }

    #[inline]
    fn is_closed(&self, s: usize) -> bool {
        self.closed[s] == self.generation
    }

    #[inline]
    fn close(&mut self, s: usize) {
        self.closed[s] = self.generation;
    }
}

#[derive(Clone)]
pub struct PathTimeEstimator {
    graph: Arc<WaypointGraph>,
    params: PathTimeParams,
    memo: HashMap<(NodeId, NodeId), Option<f64>>,
    rows: HashMap<NodeId, Arc<Vec<f64>>>,
    columns: HashMap<NodeId, Arc<Vec<f64>>>,
    scratch: Scratch,
}

impl PathTimeEstimator {
    pub fn new(graph: Arc<WaypointGraph>, params: PathTimeParams) -> Self {
        Self {
            graph,
            params,
            memo: HashMap::new(),
            rows: HashMap::new(),
            columns: HashMap::new(),
            scratch: Scratch::default(),
        }
    }

    pub fn params(&self) -> PathTimeParams {
        self.params
    }

    pub fn graph(&self) -> &WaypointGraph {
        &self.graph
    }

    #[inline]
    fn cost(&self, length: f64, turns: u32) -> f64 {
        length / self.params.cruise_speed + turns as f64 * self.params.turn_penalty
    }

    #[inline]
    fn heuristic(&self, node: NodeId, target: NodeId) -> f64 {
        self.graph.point(node).distance(self.graph.point(target)) / self.params.cruise_speed
    }

    /// Minimal turn-aware travel time, memoized per node pair.
    /// `None` means `to` cannot be reached from `from`.
    pub fn path_time(&mut self, from: NodeId, to: NodeId) -> Option<f64> {
        if let Some(&t) = self.memo.get(&(from, to)) {
            return t;
        }
        if let Some(row) = self.rows.get(&from) {
            let t = row[to.index()];
            return t.is_finite().then_some(t);
        }
        let t = self.search(from, to, true).map(|(t, _)| t);
        self.memo.insert((from, to), t);
        t
    }

    /// Same as [`path_time`](Self::path_time) but never reads or writes the memo.
    pub fn path_time_uncached(&mut self, from: NodeId, to: NodeId) -> Option<f64> {
        self.search(from, to, true).map(|(t, _)| t)
    }

    /// Travel time found by plain Dijkstra over the state graph (zero heuristic).
    pub fn path_time_dijkstra(&mut self, from: NodeId, to: NodeId) -> Option<f64> {
        self.search(from, to, false).map(|(t, _)| t)
    }

    /// Fastest route, including the node sequence.
    pub fn route(&mut self, from: NodeId, to: NodeId) -> Option<Route> {
        self.search(from, to, true).map(|(time, last)| Route {
            nodes: self.unwind(last),
            time,
        })
    }

    /// Travel times from `from` to every node (infinite when unreachable),
    /// computed by a single-source search and cached.
    pub fn times_from(&mut self, from: NodeId) -> Arc<Vec<f64>> {
        if let Some(row) = self.rows.get(&from) {
            return Arc::clone(row);
        }
        let row = Arc::new(self.single_source(from));
        self.rows.insert(from, Arc::clone(&row));
        row
    }

    /// Travel times from every node to `to`, each starting without a
    /// heading (infinite when `to` cannot be reached). One backward search,
    /// cached.
    pub fn times_to(&mut self, to: NodeId) -> Arc<Vec<f64>> {
        if let Some(col) = self.columns.get(&to) {
            return Arc::clone(col);
        }
        let col = Arc::new(self.single_target(to));
        self.columns.insert(to, Arc::clone(&col));
        col
    }

    fn unwind(&self, mut state: usize) -> Vec<NodeId> {
        let mut nodes = Vec::new();
        loop {
            nodes.push(NodeId::from_index(state / STATES_PER_NODE));
            let parent = self.scratch.labels[state].parent;
            if parent == u32::MAX {
                break;
            }
            state = parent as usize;
        }
        nodes.reverse();
        nodes
    }

    /// A* over (node, heading) states. Returns the cost and the goal state.
    fn search(&mut self, from: NodeId, to: NodeId, use_heuristic: bool) -> Option<(f64, usize)> {
        let states = self.graph.node_count() * STATES_PER_NODE;
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.reset(states);
        let start = from.index() * STATES_PER_NODE + NO_HEADING;
        scratch.set(
            start,
            Label {
                length: 0.0,
                turns: 0,
                parent: u32::MAX,
            },
        );
        let mut open = BinaryHeap::new();
        let h0 = if use_heuristic { self.heuristic(from, to) } else { 0.0 };
        open.push(Open {
            priority: h0,
            state: start as u32,
        });
        let mut found = None;
        while let Some(Open { state, .. }) = open.pop() {
            let state = state as usize;
            if scratch.is_closed(state) {
                continue;
            }
            scratch.close(state);
            let node = NodeId::from_index(state / STATES_PER_NODE);
            let label = *scratch.label(state).expect("open state without label");
            if node == to {
                found = Some((self.cost(label.length, label.turns), state));
                break;
            }
            let heading = state % STATES_PER_NODE;
            for edge in self.graph.edges(node) {
                let turns = if heading == NO_HEADING {
                    0
                } else {
                    Heading::ALL[heading].quarter_turns_to(edge.heading)
                };
                let next = edge.to.index() * STATES_PER_NODE + edge.heading.index();
                if scratch.is_closed(next) {
                    continue;
                }
                let cand = Label {
                    length: label.length + edge.length,
                    turns: label.turns + turns,
                    parent: state as u32,
                };
                let g = self.cost(cand.length, cand.turns);
                let better = match scratch.label(next) {
                    Some(old) => g < self.cost(old.length, old.turns),
                    None => true,
                };
                if better {
                    scratch.set(next, cand);
                    let h = if use_heuristic {
                        self.heuristic(edge.to, to)
                    } else {
                        0.0
                    };
                    open.push(Open {
                        priority: g + h,
                        state: next as u32,
                    });
                }
            }
        }
        self.scratch = scratch;
        found
    }

    fn single_source(&mut self, from: NodeId) -> Vec<f64> {
        let n = self.graph.node_count();
        let mut best = vec![f64::INFINITY; n];
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.reset(n * STATES_PER_NODE);
        let start = from.index() * STATES_PER_NODE + NO_HEADING;
        scratch.set(
            start,
            Label {
                length: 0.0,
                turns: 0,
                parent: u32::MAX,
            },
        );
        let mut open = BinaryHeap::new();
        open.push(Open {
            priority: 0.0,
            state: start as u32,
        });
        while let Some(Open { state, .. }) = open.pop() {
            let state = state as usize;
            if scratch.is_closed(state) {
                continue;
            }
            scratch.close(state);
            let node = state / STATES_PER_NODE;
            let label = *scratch.label(state).expect("open state without label");
            let g = self.cost(label.length, label.turns);
            if g < best[node] {
                best[node] = g;
            }
            let heading = state % STATES_PER_NODE;
            for edge in self.graph.edges(NodeId::from_index(node)) {
                let turns = if heading == NO_HEADING {
                    0
                } else {
                    Heading::ALL[heading].quarter_turns_to(edge.heading)
                };
                let next = edge.to.index() * STATES_PER_NODE + edge.heading.index();
                if scratch.is_closed(next) {
                    continue;
                }
                let cand = Label {
                    length: label.length + edge.length,
                    turns: label.turns + turns,
                    parent: state as u32,
                };
                let g = self.cost(cand.length, cand.turns);
                let better = match scratch.label(next) {
                    Some(old) => g < self.cost(old.length, old.turns),
                    None => true,
                };
                if better {
                    scratch.set(next, cand);
                    open.push(Open {
                        priority: g,
                        state: next as u32,
                    });
                }
            }
        }
        self.scratch = scratch;
        best
    }
}

impl PathTimeEstimator {
    /// Backward search. A state is a node plus the heading the robot had on
    /// arrival; its label holds the remaining length and turns to the target.
    fn single_target(&mut self, to: NodeId) -> Vec<f64> {
        let n = self.graph.node_count();
        let mut best = vec![f64::INFINITY; n];
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.reset(n * STATES_PER_NODE);
        let mut open = BinaryHeap::new();
        for h in 0..STATES_PER_NODE {
            let s = to.index() * STATES_PER_NODE + h;
            scratch.set(
                s,
                Label {
                    length: 0.0,
                    turns: 0,
                    parent: u32::MAX,
                },
            );
            open.push(Open {
                priority: 0.0,
                state: s as u32,
            });
        }
        while let Some(Open { state, .. }) = open.pop() {
            let state = state as usize;
            if scratch.is_closed(state) {
                continue;
            }
            scratch.close(state);
            let node = state / STATES_PER_NODE;
            let arrived = state % STATES_PER_NODE;
            let label = *scratch.label(state).expect("open state without label");
            if arrived == NO_HEADING {
                // robots start here; nothing leads into this state
                best[node] = self.cost(label.length, label.turns);
                continue;
            }
            let heading = Heading::ALL[arrived];
            let v = NodeId::from_index(node);
            for &u in self.graph.predecessors(v) {
                let Some(edge) = self.graph.edge(u, v) else { continue };
                if edge.heading != heading {
                    continue;
                }
                for before in 0..STATES_PER_NODE {
                    let next = u.index() * STATES_PER_NODE + before;
                    if scratch.is_closed(next) {
                        continue;
                    }
                    let turns = if before == NO_HEADING {
                        0
                    } else {
                        Heading::ALL[before].quarter_turns_to(heading)
                    };
                    let cand = Label {
                        length: label.length + edge.length,
                        turns: label.turns + turns,
                        parent: state as u32,
                    };
                    let g = self.cost(cand.length, cand.turns);
                    let better = match scratch.label(next) {
                        Some(old) => g < self.cost(old.length, old.turns),
                        None => true,
                    };
                    if better {
                        scratch.set(next, cand);
                        open.push(Open {
                            priority: g,
                            state: next as u32,
                        });
                    }
                }
            }
        }
        self.scratch = scratch;
        best
    }
}

/// Prominence of every storage location, indexed by location id.
/// Lower values are more prominent.
#[derive(Clone, Debug, PartialEq)]
pub struct ProminenceField {
    values: Vec<f64>,
}

impl ProminenceField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn get(&self, location: LocationId) -> f64 {
        self.values[location.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Minimum travel time from `location` to any pick station.
pub fn prominence(estimator: &mut PathTimeEstimator, world: &World, location: LocationId) -> Result<f64, ScoringError> {
    let pick_nodes: Vec<NodeId> = world.pick_stations().map(|s| s.waypoint).collect();
    if pick_nodes.is_empty() {
        return Err(ScoringError::NoPickStations);
    }
    let from = world.location(location).waypoint;
    pick_nodes
        .iter()
        .filter_map(|&m| estimator.path_time(from, m))
        .min_by(f64::total_cmp)
        .ok_or(ScoringError::Unreachable(location))
}

pub fn compute_prominence_field(
    estimator: &mut PathTimeEstimator,
    world: &World,
) -> Result<ProminenceField, ScoringError> {
    let columns: Vec<_> = world.pick_stations().map(|s| estimator.times_to(s.waypoint)).collect();
    if columns.is_empty() {
        return Err(ScoringError::NoPickStations);
    }
    let values = world
        .locations
        .iter()
        .map(|l| {
            let p = columns
                .iter()
                .map(|c| c[l.waypoint.index()])
                .fold(f64::INFINITY, f64::min);
            if p.is_finite() {
                Ok(p)
            } else {
                Err(ScoringError::Unreachable(l.id))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProminenceField { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Point;

    /// 3x3 grid, 1 m spacing, all edges two-way.
    fn grid3() -> (Arc<WaypointGraph>, Vec<NodeId>) {
        let mut g = WaypointGraph::new();
        let mut ids = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                ids.push(g.add_node(Point::new(x as f64, y as f64)));
            }
        }
        for y in 0..3 {
            for x in 0..3 {
                let i = y * 3 + x;
                if x < 2 {
                    g.add_two_way(ids[i], ids[i + 1]).unwrap();
                }
                if y < 2 {
                    g.add_two_way(ids[i], ids[i + 3]).unwrap();
                }
            }
        }
        (Arc::new(g), ids)
    }

    #[test]
    fn identity_is_zero() {
        let (g, ids) = grid3();
        let mut est = PathTimeEstimator::new(g, PathTimeParams::default());
        assert_eq!(est.path_time(ids[4], ids[4]), Some(0.0));
    }

    #[test]
    fn corner_to_corner_prefers_single_turn() {
        let (g, ids) = grid3();
        let params = PathTimeParams {
            cruise_speed: 1.0,
            turn_penalty: 2.0,
        };
        let mut est = PathTimeEstimator::new(g, params);
        // exhaustive oracle: every monotone path of length 4 has 1, 2 or 3 turns,
        // the cheapest is 4 m + 1 turn
        assert_eq!(est.path_time(ids[0], ids[8]), Some(6.0));
        let route = est.route(ids[0], ids[8]).unwrap();
        assert_eq!(route.nodes.len(), 5);
        assert_eq!(route.time, 6.0);
    }

    #[test]
    fn unreachable_is_none() {
        let mut g = WaypointGraph::new();
        let a = g.add_node(Point::new(0.0, 0.0));
        let b = g.add_node(Point::new(1.0, 0.0));
        g.add_edge(a, b).unwrap();
        let mut est = PathTimeEstimator::new(Arc::new(g), PathTimeParams::default());
        assert_eq!(est.path_time(b, a), None);
        assert!(est.times_from(b)[a.index()].is_infinite());
    }

    #[test]
    fn reversal_costs_two_turns() {
        // a dead-end spur forces a u-turn: a -> b -> c -> b -> d
        let mut g = WaypointGraph::new();
        let a = g.add_node(Point::new(0.0, 0.0));
        let b = g.add_node(Point::new(1.0, 0.0));
        let c = g.add_node(Point::new(2.0, 0.0));
        let d = g.add_node(Point::new(1.0, -1.0));
        g.add_edge(a, b).unwrap();
        g.add_two_way(b, c).unwrap();
        g.add_edge(c, b).unwrap();
        g.add_edge(b, d).unwrap();
        let params = PathTimeParams {
            cruise_speed: 1.0,
            turn_penalty: 2.0,
        };
        let mut est = PathTimeEstimator::new(Arc::new(g), params);
        // a->b->d: 2 m + 1 turn
        assert_eq!(est.path_time(a, d), Some(4.0));
        // c->b->d: 2 m + 1 turn
        assert_eq!(est.path_time(c, d), Some(4.0));
        // reaching b heading west from a requires the c spur: 3 m + reversal
        let route = est.route(a, c).unwrap();
        assert_eq!(route.nodes, vec![a, b, c]);
        assert_eq!(est.path_time(a, c), Some(2.0));
    }

    #[test]
    fn rows_match_pairwise_search() {
        let (g, ids) = grid3();
        let mut est = PathTimeEstimator::new(g, PathTimeParams::default());
        let row = est.times_from(ids[2]);
        for &t in &ids {
            let fresh = est.path_time_uncached(ids[2], t).unwrap();
            assert!((row[t.index()] - fresh).abs() < 1e-12);
        }
    }

    #[test]
    fn columns_match_pairwise_search() {
        let spec = crate::world::LayoutSpec {
            name: "t".into(),
            pick_stations: 2,
            replenish_stations: 1,
            aisles_horizontal: 1,
            aisles_vertical: 2,
            pods: 0,
        };
        let world = crate::layout::generate_layout(&spec).unwrap();
        let mut est = PathTimeEstimator::new(world.graph.clone(), PathTimeParams::default());
        let target = world.pick_stations().next().unwrap().waypoint;
        let col = est.times_to(target);
        for from in world.graph.nodes() {
            let fresh = est.path_time_uncached(from, target).unwrap_or(f64::INFINITY);
            assert!(
                (col[from.index()] - fresh).abs() < 1e-9 || col[from.index()] == fresh,
                "{from}"
            );
        }
    }
}
