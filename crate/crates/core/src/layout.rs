//! Warehouse layout generation.
//!
//! The storage area is a grid of 2x4 storage blocks (2 deep, 4 wide) with
//! one-way aisles of width one waypoint between blocks and a one-way ring road
//! around them. With `h` horizontal and `v` vertical aisles there are
//! `(h + 1) x (v + 1)` blocks, and every storage location touches exactly one
//! horizontal aisle. Waypoints sit on a 1 m grid:
//!
//! * aisle columns at `x = 5k` for `k = 0..=v+1`, aisle rows at `y = 3k` for
//!   `k = 0..=h+1`;
//! * the ring runs counter-clockwise (south edge east, east edge north, north
//!   edge west, west edge south); interior aisles alternate direction, so the
//!   graph is strongly connected;
//! * each storage location is a dead-end waypoint with a two-way edge to the
//!   adjacent aisle waypoint;
//! * pick stations sit on the east side and replenishment stations on the
//!   west side, each at the far corner of a one-way U-shaped lane leaving and
//!   re-entering the ring road. The lane doubles as the station queue.

use crate::error::LayoutError;
use crate::graph::{Point, WaypointGraph};
use crate::ids::{LocationId, NodeId, PodId, StationId};
use crate::pathtime::{PathTimeEstimator, PathTimeParams};
use crate::world::{LayoutSpec, Placement, Pod, Station, StationKind, StorageLocation, Tile, World};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutOptions {
    pub pod_capacity: u32,
    /// Waypoints from the ring road to the station, station included.
    pub lane_length: usize,
    pub pick_unit_time: f64,
    pub replenish_unit_time: f64,
    /// Used to rank locations when placing the initial pods.
    pub path_params: PathTimeParams,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            pod_capacity: 40,
            lane_length: 5,
            pick_unit_time: 10.0,
            replenish_unit_time: 10.0,
            path_params: PathTimeParams::default(),
        }
    }
}

pub fn generate_layout(spec: &LayoutSpec) -> Result<World, LayoutError> {
    generate_layout_with(spec, &LayoutOptions::default())
}

struct GridBuilder {
    graph: WaypointGraph,
    at: HashMap<(i64, i64), NodeId>,
}

impl GridBuilder {
    fn node(&mut self, x: i64, y: i64) -> NodeId {
        if let Some(&n) = self.at.get(&(x, y)) {
            return n;
        }
        let n = self.graph.add_node(Point::new(x as f64, y as f64));
        self.at.insert((x, y), n);
        n
    }

    fn chain(&mut self, points: &[(i64, i64)]) {
        for w in points.windows(2) {
            let a = self.node(w[0].0, w[0].1);
            let b = self.node(w[1].0, w[1].1);
            self.graph
                .add_edge(a, b)
                .expect("layout edges are unit axis-aligned steps");
        }
    }
}

/// Lower row of the lane for each of `count` stations spread along `height`.
fn lane_rows(count: usize, height: usize) -> Vec<i64> {
    let spacing = height as f64 / count as f64;
    (0..count)
        .map(|s| (s as f64 * spacing + (spacing - 2.0) / 2.0).floor() as i64)
        .collect()
}

pub fn generate_layout_with(spec: &LayoutSpec, opts: &LayoutOptions) -> Result<World, LayoutError> {
    for (field, value) in [
        ("pick_stations", spec.pick_stations),
        ("replenish_stations", spec.replenish_stations),
        ("aisles_horizontal", spec.aisles_horizontal),
        ("aisles_vertical", spec.aisles_vertical),
    ] {
        if value == 0 {
            return Err(LayoutError::ZeroCount {
                name: spec.name.clone(),
                field,
            });
        }
    }
    let locations_total = spec.storage_location_count();
    if spec.pods > locations_total {
        return Err(LayoutError::TooManyPods {
            name: spec.name.clone(),
            pods: spec.pods,
            locations: locations_total,
        });
    }
    let block_cols = spec.aisles_vertical + 1;
    let block_rows = spec.aisles_horizontal + 1;
    let width = 5 * block_cols + 1;
    let height = 3 * block_rows + 1;
    for stations in [spec.pick_stations, spec.replenish_stations] {
        if 3 * stations > height {
            return Err(LayoutError::StationsDoNotFit {
                name: spec.name.clone(),
                stations,
                height,
            });
        }
    }
    let (w, h) = (width as i64, height as i64);
    let mut b = GridBuilder {
        graph: WaypointGraph::new(),
        at: HashMap::new(),
    };

    // Aisle waypoints first so their ids are stable and contiguous.
    for y in 0..h {
        for x in 0..w {
            if x % 5 == 0 || y % 3 == 0 {
                b.node(x, y);
            }
        }
    }
    let last_row = block_rows as i64;
    for k in 0..=last_row {
        let y = 3 * k;
        let eastbound = if k == 0 {
            true
        } else if k == last_row {
            false
        } else {
            k % 2 == 0
        };
        let mut row: Vec<(i64, i64)> = (0..w).map(|x| (x, y)).collect();
        if !eastbound {
            row.reverse();
        }
        b.chain(&row);
    }
    let last_col = block_cols as i64;
    for k in 0..=last_col {
        let x = 5 * k;
        let northbound = if k == 0 {
            false
        } else if k == last_col {
            true
        } else {
            k % 2 == 1
        };
        let mut col: Vec<(i64, i64)> = (0..h).map(|y| (x, y)).collect();
        if !northbound {
            col.reverse();
        }
        b.chain(&col);
    }

    // Storage locations, ordered by tile row then column.
    let mut locations = Vec::with_capacity(locations_total);
    for tile_row in 0..2 * block_rows {
        let block_row = tile_row / 2;
        let upper = tile_row % 2 == 1;
        let y = 3 * block_row as i64 + if upper { 2 } else { 1 };
        let aisle_y = if upper { y + 1 } else { y - 1 };
        for tile_col in 0..4 * block_cols {
            let x = 5 * (tile_col / 4) as i64 + (tile_col % 4) as i64 + 1;
            let node = b.node(x, y);
            let aisle = b.node(x, aisle_y);
            b.graph.add_two_way(node, aisle).expect("unit step");
            locations.push(StorageLocation {
                id: LocationId::from_index(locations.len()),
                waypoint: node,
                occupant: None,
                claim: None,
                tile: Tile {
                    row: tile_row as u32,
                    col: tile_col as u32,
                },
            });
        }
    }

    let lane = opts.lane_length.max(1) as i64;
    let mut stations = Vec::new();
    for y in lane_rows(spec.pick_stations, height) {
        // east ring runs north: enter on the lower row, leave on the upper row
        let mut pts = vec![(w - 1, y)];
        pts.extend((1..=lane).map(|k| (w - 1 + k, y)));
        pts.extend((0..lane).map(|k| (w - 1 + lane - k, y + 1)));
        pts.push((w - 1, y + 1));
        b.chain(&pts);
        stations.push((StationKind::Pick, b.node(w - 1 + lane, y)));
    }
    for y in lane_rows(spec.replenish_stations, height) {
        // west ring runs south: enter on the upper row, leave on the lower row
        let mut pts = vec![(0, y + 1)];
        pts.extend((1..=lane).map(|k| (-k, y + 1)));
        pts.extend((0..lane).map(|k| (-lane + k, y)));
        pts.push((0, y));
        b.chain(&pts);
        stations.push((StationKind::Replenish, b.node(-lane, y + 1)));
    }
    let stations: Vec<Station> = stations
        .into_iter()
        .enumerate()
        .map(|(i, (kind, waypoint))| Station {
            id: StationId::from_index(i),
            kind,
            waypoint,
            queue: VecDeque::new(),
            unit_handling_time: match kind {
                StationKind::Pick => opts.pick_unit_time,
                StationKind::Replenish => opts.replenish_unit_time,
            },
            assigned: VecDeque::new(),
            serving: None,
        })
        .collect();

    let graph = Arc::new(b.graph);
    check_strongly_connected(spec, &graph)?;

    let mut world = World::new(
        spec.clone(),
        Arc::clone(&graph),
        locations,
        stations,
        ((2 * block_rows) as u32, (4 * block_cols) as u32),
    );

    // Pods fill the most prominent locations first.
    let mut estimator = PathTimeEstimator::new(graph, opts.path_params);
    let field =
        crate::pathtime::compute_prominence_field(&mut estimator, &world).expect("connected layout with pick stations");
    let mut order: Vec<LocationId> = world.locations.iter().map(|l| l.id).collect();
    order.sort_by(|a, b| field.get(*a).total_cmp(&field.get(*b)).then(a.cmp(b)));
    for (i, &loc) in order.iter().take(spec.pods).enumerate() {
        let id = PodId::from_index(i);
        world.pods.push(Pod::new(id, opts.pod_capacity, Placement::Stored(loc)));
        world.locations[loc.index()].occupant = Some(id);
    }
    Ok(world)
}

fn check_strongly_connected(spec: &LayoutSpec, graph: &WaypointGraph) -> Result<(), LayoutError> {
    let origin = NodeId(0);
    let forward = graph.reachable_from(origin);
    let backward = graph.reaching(origin);
    if let Some(n) = graph.nodes().find(|n| !forward[n.index()] || !backward[n.index()]) {
        return Err(LayoutError::NotConnected {
            name: spec.name.clone(),
            detail: format!("waypoint {n} at {:?}", graph.point(n)),
        });
    }
    Ok(())
}
