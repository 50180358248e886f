//! Robot travel times under a trapezoidal speed profile.
//!
//! Robots move along straight runs of the waypoint graph. Every run starts
//! and ends at rest; turns happen on the spot between runs.

use super::config::KinematicsConfig;
use crate::graph::{Heading, WaypointGraph};
use crate::ids::NodeId;

/// Peak speed and the distances spent accelerating and braking over `length`.
fn profile(length: f64, k: &KinematicsConfig) -> (f64, f64, f64) {
    let (a, b) = (k.acceleration, k.deceleration);
    let v = k.max_speed;
    let accel = v * v / (2.0 * a);
    let brake = v * v / (2.0 * b);
    if accel + brake <= length {
        (v, accel, brake)
    } else {
        let peak = (2.0 * length * a * b / (a + b)).sqrt();
        (peak, peak * peak / (2.0 * a), peak * peak / (2.0 * b))
    }
}

/// Rest-to-rest travel time over a straight run.
pub fn segment_time(length: f64, k: &KinematicsConfig) -> f64 {
    if length <= 0.0 {
        return 0.0;
    }
    let (peak, accel, brake) = profile(length, k);
    peak / k.acceleration + peak / k.deceleration + (length - accel - brake) / peak
}

/// Time to cover the first `x` metres of a rest-to-rest run of `length`.
pub fn time_at_distance(x: f64, length: f64, k: &KinematicsConfig) -> f64 {
    if length <= 0.0 || x <= 0.0 {
        return 0.0;
    }
    let x = x.min(length);
    let (peak, accel, brake) = profile(length, k);
    if x <= accel {
        (2.0 * x / k.acceleration).sqrt()
    } else if x <= length - brake {
        peak / k.acceleration + (x - accel) / peak
    } else {
        let rest = (length - x).max(0.0);
        segment_time(length, k) - (2.0 * rest / k.deceleration).sqrt()
    }
}

/// Arrival time at every node of `path` for a robot at rest on `path[0]`
/// facing `heading` at time `start`, ignoring other robots.
pub fn advance_robot(
    graph: &WaypointGraph,
    path: &[NodeId],
    heading: Heading,
    start: f64,
    k: &KinematicsConfig,
) -> Vec<(NodeId, f64)> {
    let mut out = Vec::with_capacity(path.len().saturating_sub(1));
    let mut heading = heading;
    let mut t = start;
    let mut i = 0;
    while i + 1 < path.len() {
        let dir = graph.edge(path[i], path[i + 1]).expect("path edges must exist").heading;
        t += heading.quarter_turns_to(dir) as f64 * k.turn_time_90;
        heading = dir;
        let mut j = i + 1;
        while j + 1 < path.len() && graph.edge(path[j], path[j + 1]).map(|e| e.heading) == Some(dir) {
            j += 1;
        }
        let origin = graph.point(path[i]);
        let length = origin.distance(graph.point(path[j]));
        for &n in &path[i + 1..=j] {
            out.push((n, t + time_at_distance(origin.distance(graph.point(n)), length, k)));
        }
        t += segment_time(length, k);
        i = j;
    }
    out
}
