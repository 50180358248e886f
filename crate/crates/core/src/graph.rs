//! Directed waypoint graph on which robots travel.

use crate::error::GraphError;
use crate::ids::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Cardinal travel direction. The graph only has axis-aligned edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    /// Number of 90 degree rotations needed to go from `self` to `other`.
    /// A reversal counts as two.
    #[inline]
    pub fn quarter_turns_to(self, other: Heading) -> u32 {
        let diff = (self.index() as i32 - other.index() as i32).rem_euclid(4);
        match diff {
            0 => 0,
            2 => 2,
            _ => 1,
        }
    }

    fn from_delta(dx: f64, dy: f64) -> Option<Heading> {
        match (dx.abs() > 0.0, dy.abs() > 0.0) {
            (true, false) => Some(if dx > 0.0 { Heading::East } else { Heading::West }),
            (false, true) => Some(if dy > 0.0 { Heading::North } else { Heading::South }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub to: NodeId,
    pub length: f64,
    pub heading: Heading,
}

#[derive(Clone, Debug, Default)]
pub struct WaypointGraph {
    points: Vec<Point>,
    out_edges: Vec<Vec<Edge>>,
    in_edges: Vec<Vec<NodeId>>,
}

impl WaypointGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, at: Point) -> NodeId {
        let id = NodeId::from_index(self.points.len());
        self.points.push(at);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        id
    }

    /// Adds a directed edge whose length is the distance between its ends.
    /// Adding an existing edge again is a no-op.
    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphError> {
        let a = self.point_checked(from)?;
        let b = self.point_checked(to)?;
        let length = a.distance(b);
        if length == 0.0 {
            return Err(GraphError::ZeroLength { from, to });
        }
        let heading = Heading::from_delta(b.x - a.x, b.y - a.y).ok_or(GraphError::NotAxisAligned { from, to })?;
        if self.out_edges[from.index()].iter().any(|e| e.to == to) {
            return Ok(());
        }
        self.out_edges[from.index()].push(Edge { to, length, heading });
        self.in_edges[to.index()].push(from);
        Ok(())
    }

    pub fn add_two_way(&mut self, a: NodeId, b: NodeId) -> Result<(), GraphError> {
        self.add_edge(a, b)?;
        self.add_edge(b, a)
    }

    fn point_checked(&self, node: NodeId) -> Result<Point, GraphError> {
        self.points
            .get(node.index())
            .copied()
            .ok_or(GraphError::UnknownNode(node))
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn point(&self, node: NodeId) -> Point {
        self.points[node.index()]
    }

    #[inline]
    pub fn edges(&self, node: NodeId) -> &[Edge] {
        &self.out_edges[node.index()]
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.out_edges[from.index()].iter().find(|e| e.to == to)
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.points.len()).map(NodeId::from_index)
    }

    /// Nodes with an edge into `node`.
    pub fn predecessors(&self, node: NodeId) -> &[NodeId] {
        &self.in_edges[node.index()]
    }

    /// Nodes reachable from `start` following edge directions.
    pub fn reachable_from(&self, start: NodeId) -> Vec<bool> {
        self.flood(start, |g, n| g.out_edges[n.index()].iter().map(|e| e.to).collect())
    }

    /// Nodes from which `target` is reachable.
    pub fn reaching(&self, target: NodeId) -> Vec<bool> {
        self.flood(target, |g, n| g.in_edges[n.index()].clone())
    }

    fn flood(&self, start: NodeId, next: impl Fn(&Self, NodeId) -> Vec<NodeId>) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([start]);
        seen[start.index()] = true;
        while let Some(n) = queue.pop_front() {
            for m in next(self, n) {
                if !seen[m.index()] {
                    seen[m.index()] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turns() {
        assert_eq!(Heading::North.quarter_turns_to(Heading::North), 0);
        assert_eq!(Heading::North.quarter_turns_to(Heading::East), 1);
        assert_eq!(Heading::North.quarter_turns_to(Heading::West), 1);
        assert_eq!(Heading::North.quarter_turns_to(Heading::South), 2);
        assert_eq!(Heading::West.quarter_turns_to(Heading::East), 2);
    }

    #[test]
    fn rejects_diagonal_edges() {
        let mut g = WaypointGraph::new();
        let a = g.add_node(Point::new(0.0, 0.0));
        let b = g.add_node(Point::new(1.0, 1.0));
        assert_eq!(g.add_edge(a, b), Err(GraphError::NotAxisAligned { from: a, to: b }));
    }

    #[test]
    fn reachability_respects_direction() {
        let mut g = WaypointGraph::new();
        let a = g.add_node(Point::new(0.0, 0.0));
        let b = g.add_node(Point::new(1.0, 0.0));
        g.add_edge(a, b).unwrap();
        assert_eq!(g.reachable_from(a), vec![true, true]);
        assert_eq!(g.reachable_from(b), vec![false, true]);
        assert_eq!(g.reaching(b), vec![true, true]);
        assert_eq!(g.edge(a, b).unwrap().heading, Heading::East);
    }
}
