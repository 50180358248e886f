//! Static and dynamic warehouse state: layout, pods, stations, robots and orders.

use crate::error::WorldError;
use crate::graph::{Heading, Point, WaypointGraph};
use crate::ids::{LocationId, NodeId, OrderId, PodId, RobotId, SkuId, StationId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

/// Order frequencies of all SKUs. Ids are the indices into `frequencies`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkuCatalog {
    frequencies: Vec<f64>,
}

impl SkuCatalog {
    pub fn new(frequencies: Vec<f64>) -> Result<Self, WorldError> {
        if let Some(&f) = frequencies.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(WorldError::FrequencyOutOfRange(f));
        }
        let sum: f64 = frequencies.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WorldError::FrequenciesNotNormalized(sum));
        }
        Ok(Self { frequencies })
    }

    /// Normalizes nonnegative weights into frequencies.
    pub fn from_weights(weights: &[f64]) -> Result<Self, WorldError> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(WorldError::FrequenciesNotNormalized(total));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(skus: usize) -> Self {
        Self {
            frequencies: vec![1.0 / skus as f64; skus],
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequency(&self, sku: SkuId) -> f64 {
        self.frequencies[sku.index()]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn skus(&self) -> impl Iterator<Item = SkuId> {
        (0..self.frequencies.len()).map(SkuId::from_index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placement {
    Stored(LocationId),
    Carried(RobotId),
    AtStation(StationId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pod {
    pub id: PodId,
    pub inventory: BTreeMap<SkuId, u32>,
    pub capacity: u32,
    pub placement: Placement,
    /// Robot that has committed to fetching this pod.
    pub reserved_by: Option<RobotId>,
}

impl Pod {
    pub fn new(id: PodId, capacity: u32, placement: Placement) -> Self {
        Self {
            id,
            inventory: BTreeMap::new(),
            capacity,
            placement,
            reserved_by: None,
        }
    }

    pub fn units(&self) -> u32 {
        self.inventory.values().sum()
    }

    pub fn free_capacity(&self) -> u32 {
        self.capacity - self.units()
    }

    pub fn count(&self, sku: SkuId) -> u32 {
        self.inventory.get(&sku).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.inventory.is_empty()
    }

    pub fn stored_at(&self) -> Option<LocationId> {
        match self.placement {
            Placement::Stored(l) => Some(l),
            _ => None,
        }
    }

    pub fn add(&mut self, sku: SkuId, units: u32) -> Result<(), WorldError> {
        let total = self.units() + units;
        if total > self.capacity {
            return Err(WorldError::OverCapacity {
                pod: self.id,
                units: total,
                capacity: self.capacity,
            });
        }
        if units > 0 {
            *self.inventory.entry(sku).or_insert(0) += units;
        }
        Ok(())
    }

    /// Removes one unit; returns false when the pod holds none of `sku`.
    pub fn take_one(&mut self, sku: SkuId) -> bool {
        match self.inventory.get_mut(&sku) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.inventory.remove(&sku);
                true
            }
            None => false,
        }
    }
}

/// Row/column of a storage location in the storage-only grid (aisles removed).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub row: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageLocation {
    pub id: LocationId,
    pub waypoint: NodeId,
    pub occupant: Option<PodId>,
    /// Robot currently inside, or on its way to use, this location.
    pub claim: Option<RobotId>,
    pub tile: Tile,
}

impl StorageLocation {
    /// Free for a new pod: no pod and no robot claim.
    pub fn is_available(&self) -> bool {
        self.occupant.is_none() && self.claim.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationKind {
    Pick,
    Replenish,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Station {
    pub id: StationId,
    pub kind: StationKind,
    /// Node where pods are handled.
    pub waypoint: NodeId,
    /// Robots with a pod trip bound for this station, in issue order.
    pub queue: VecDeque<RobotId>,
    pub unit_handling_time: f64,
    /// Orders currently assigned to the station, in assignment order.
    pub assigned: VecDeque<OrderId>,
    /// Robot whose pod is being handled right now.
    pub serving: Option<RobotId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RobotRole {
    PickSupply(StationId),
    ReplenishSupply(StationId),
    Repositioner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    PickUp { pod: PodId, location: LocationId },
    Visit { station: StationId },
    SetDown { pod: PodId, location: LocationId },
    Park { location: LocationId },
}

impl Task {
    pub fn location(&self) -> Option<LocationId> {
        match *self {
            Task::PickUp { location, .. } | Task::SetDown { location, .. } | Task::Park { location } => Some(location),
            Task::Visit { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotAgent {
    pub id: RobotId,
    pub node: NodeId,
    pub position: Point,
    pub heading: Heading,
    pub speed: f64,
    pub role: RobotRole,
    pub carried: Option<PodId>,
    /// Pending tasks; the front one is being worked on.
    pub tasks: VecDeque<Task>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderState {
    Open,
    Assigned(StationId),
    Completed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLine {
    pub sku: SkuId,
    pub quantity: u32,
    pub picked: u32,
}

impl OrderLine {
    pub fn new(sku: SkuId, quantity: u32) -> Self {
        Self {
            sku,
            quantity,
            picked: 0,
        }
    }

    pub fn remaining(&self) -> u32 {
        self.quantity - self.picked
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomerOrder {
    pub id: OrderId,
    pub lines: Vec<OrderLine>,
    pub state: OrderState,
    pub created: f64,
    pub completed: Option<f64>,
}

impl CustomerOrder {
    pub fn remaining_units(&self) -> u32 {
        self.lines.iter().map(OrderLine::remaining).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplenishmentOrder {
    pub id: OrderId,
    pub sku: SkuId,
    pub quantity: u32,
    pub loaded: u32,
    pub state: OrderState,
}

impl ReplenishmentOrder {
    pub fn remaining(&self) -> u32 {
        self.quantity - self.loaded
    }
}

/// Dimensions of a warehouse: station counts, aisle grid and pod count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub name: String,
    pub pick_stations: usize,
    pub replenish_stations: usize,
    pub aisles_horizontal: usize,
    pub aisles_vertical: usize,
    pub pods: usize,
}

impl LayoutSpec {
    pub fn small() -> Self {
        Self::named("Small", 4, 4, 8, 10, 673)
    }

    pub fn wide() -> Self {
        Self::named("Wide", 8, 8, 16, 10, 1271)
    }

    pub fn long() -> Self {
        Self::named("Long", 4, 4, 8, 22, 1407)
    }

    pub fn large() -> Self {
        Self::named("Large", 8, 8, 16, 22, 2658)
    }

    pub fn builtins() -> [LayoutSpec; 4] {
        [Self::small(), Self::wide(), Self::long(), Self::large()]
    }

    pub fn builtin(name: &str) -> Option<LayoutSpec> {
        Self::builtins().into_iter().find(|l| l.name.eq_ignore_ascii_case(name))
    }

    fn named(
        name: &str,
        pick_stations: usize,
        replenish_stations: usize,
        aisles_horizontal: usize,
        aisles_vertical: usize,
        pods: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            pick_stations,
            replenish_stations,
            aisles_horizontal,
            aisles_vertical,
            pods,
        }
    }

    /// Each block is 2 deep and 4 wide; aisles run between and around the blocks.
    pub fn storage_location_count(&self) -> usize {
        8 * (self.aisles_horizontal + 1) * (self.aisles_vertical + 1)
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub layout: LayoutSpec,
    pub graph: Arc<WaypointGraph>,
    pub locations: Vec<StorageLocation>,
    pub stations: Vec<Station>,
    pub pods: Vec<Pod>,
    pub robots: Vec<RobotAgent>,
    pub catalog: SkuCatalog,
    pub customer_orders: BTreeMap<OrderId, CustomerOrder>,
    pub replenishment_orders: BTreeMap<OrderId, ReplenishmentOrder>,
    /// Simulation time in seconds.
    pub clock: f64,
    /// Rows and columns of the storage-only grid.
    pub storage_grid: (u32, u32),
    pub initial_units: u64,
    pub units_picked: u64,
    pub units_replenished: u64,
    demand: Vec<u64>,
    location_at_node: Vec<Option<LocationId>>,
    next_order_id: u32,
}

impl World {
    pub(crate) fn new(
        layout: LayoutSpec,
        graph: Arc<WaypointGraph>,
        locations: Vec<StorageLocation>,
        stations: Vec<Station>,
        storage_grid: (u32, u32),
    ) -> Self {
        let mut location_at_node = vec![None; graph.node_count()];
        for l in &locations {
            location_at_node[l.waypoint.index()] = Some(l.id);
        }
        let catalog = SkuCatalog::uniform(1000);
        Self {
            layout,
            graph,
            locations,
            stations,
            pods: Vec::new(),
            robots: Vec::new(),
            demand: vec![0; catalog.len()],
            catalog,
            customer_orders: BTreeMap::new(),
            replenishment_orders: BTreeMap::new(),
            clock: 0.0,
            storage_grid,
            initial_units: 0,
            units_picked: 0,
            units_replenished: 0,
            location_at_node,
            next_order_id: 0,
        }
    }

    /// Replaces the catalog. Only valid while no customer orders exist.
    pub fn set_catalog(&mut self, catalog: SkuCatalog) {
        debug_assert!(self.customer_orders.is_empty());
        self.demand = vec![0; catalog.len()];
        self.catalog = catalog;
    }

    pub fn location_at(&self, node: NodeId) -> Option<LocationId> {
        self.location_at_node.get(node.index()).copied().flatten()
    }

    pub fn location(&self, id: LocationId) -> &StorageLocation {
        &self.locations[id.index()]
    }

    pub fn pod(&self, id: PodId) -> &Pod {
        &self.pods[id.index()]
    }

    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id.index()]
    }

    pub fn pick_stations(&self) -> impl Iterator<Item = &Station> {
        self.stations.iter().filter(|s| s.kind == StationKind::Pick)
    }

    pub fn replenish_stations(&self) -> impl Iterator<Item = &Station> {
        self.stations.iter().filter(|s| s.kind == StationKind::Replenish)
    }

    pub fn pick_station_count(&self) -> usize {
        self.pick_stations().count()
    }

    /// Unfulfilled quantity of `sku` over all open and assigned customer orders.
    pub fn demand(&self, sku: SkuId) -> Result<u64, WorldError> {
        self.demand.get(sku.index()).copied().ok_or(WorldError::UnknownSku(sku))
    }

    pub fn demand_vector(&self) -> &[u64] {
        &self.demand
    }

    /// Units held in all pods divided by total pod capacity.
    pub fn fill_level(&self) -> f64 {
        let capacity: u64 = self.pods.iter().map(|p| p.capacity as u64).sum();
        if capacity == 0 {
            return 0.0;
        }
        self.total_units() as f64 / capacity as f64
    }

    pub fn total_units(&self) -> u64 {
        self.pods.iter().map(|p| p.units() as u64).sum()
    }

    pub fn total_capacity(&self) -> u64 {
        self.pods.iter().map(|p| p.capacity as u64).sum()
    }

    pub(crate) fn next_order_id(&mut self) -> OrderId {
        let id = OrderId(self.next_order_id);
        self.next_order_id += 1;
        id
    }

    pub fn add_customer_order(&mut self, lines: Vec<OrderLine>, now: f64) -> Result<OrderId, WorldError> {
        for line in &lines {
            if line.sku.index() >= self.demand.len() {
                return Err(WorldError::UnknownSku(line.sku));
            }
        }
        let id = self.next_order_id();
        for line in &lines {
            self.demand[line.sku.index()] += line.remaining() as u64;
        }
        self.customer_orders.insert(
            id,
            CustomerOrder {
                id,
                lines,
                state: OrderState::Open,
                created: now,
                completed: None,
            },
        );
        Ok(id)
    }

    pub fn add_replenishment_order(&mut self, sku: SkuId, quantity: u32) -> OrderId {
        let id = self.next_order_id();
        self.replenishment_orders.insert(
            id,
            ReplenishmentOrder {
                id,
                sku,
                quantity,
                loaded: 0,
                state: OrderState::Open,
            },
        );
        id
    }

    /// Moves one unit of `sku` from `pod` into `order`. Returns whether the
    /// order is now complete; completed orders leave the backlog.
    pub fn pick_unit(&mut self, pod: PodId, order: OrderId, sku: SkuId) -> bool {
        let o = self.customer_orders.get_mut(&order).expect("picking for unknown order");
        let line = o
            .lines
            .iter_mut()
            .find(|l| l.sku == sku && l.remaining() > 0)
            .expect("order has no open line for sku");
        let took = self.pods[pod.index()].take_one(sku);
        assert!(took, "pod {pod} holds no {sku}");
        line.picked += 1;
        self.demand[sku.index()] -= 1;
        self.units_picked += 1;
        if o.remaining_units() == 0 {
            o.state = OrderState::Completed;
            o.completed = Some(self.clock);
            self.customer_orders.remove(&order);
            true
        } else {
            false
        }
    }

    /// Loads one unit of a replenishment order onto `pod`. Returns whether the
    /// order is now complete; completed orders are dropped.
    pub fn load_unit(&mut self, pod: PodId, order: OrderId) -> Result<bool, WorldError> {
        let o = self
            .replenishment_orders
            .get_mut(&order)
            .expect("loading for unknown order");
        self.pods[pod.index()].add(o.sku, 1)?;
        o.loaded += 1;
        self.units_replenished += 1;
        if o.remaining() == 0 {
            self.replenishment_orders.remove(&order);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn store_pod(&mut self, pod: PodId, location: LocationId) {
        let loc = &mut self.locations[location.index()];
        assert!(loc.occupant.is_none(), "{location} already holds a pod");
        loc.occupant = Some(pod);
        self.pods[pod.index()].placement = Placement::Stored(location);
    }

    pub fn lift_pod(&mut self, pod: PodId, robot: RobotId) {
        if let Placement::Stored(l) = self.pods[pod.index()].placement {
            self.locations[l.index()].occupant = None;
        }
        self.pods[pod.index()].placement = Placement::Carried(robot);
        self.robots[robot.index()].carried = Some(pod);
    }

    /// Checks unit conservation and the location/pod placement bijection.
    /// Returns a description of every violation found.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let held = self.total_units();
        if held + self.units_picked != self.initial_units + self.units_replenished {
            problems.push(format!(
                "unit conservation: held {held} + picked {} != initial {} + replenished {}",
                self.units_picked, self.initial_units, self.units_replenished
            ));
        }
        for pod in &self.pods {
            if pod.units() > pod.capacity {
                problems.push(format!("{} over capacity", pod.id));
            }
            if let Placement::Stored(l) = pod.placement {
                if self.locations[l.index()].occupant != Some(pod.id) {
                    problems.push(format!("{} claims {l} but the location disagrees", pod.id));
                }
            }
        }
        for loc in &self.locations {
            if let Some(p) = loc.occupant {
                if self.pods[p.index()].placement != Placement::Stored(loc.id) {
                    problems.push(format!("{} holds {p} but the pod disagrees", loc.id));
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::generate_layout;

    fn tiny_world() -> World {
        let spec = LayoutSpec {
            name: "tiny".into(),
            pick_stations: 1,
            replenish_stations: 1,
            aisles_horizontal: 1,
            aisles_vertical: 1,
            pods: 2,
        };
        generate_layout(&spec).unwrap()
    }

    #[test]
    fn catalog_rejects_unnormalized() {
        assert!(SkuCatalog::new(vec![0.5, 0.4]).is_err());
        assert!(SkuCatalog::new(vec![0.5, 0.5]).is_ok());
        let c = SkuCatalog::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(c.frequencies(), &[0.25, 0.75]);
    }

    #[test]
    fn demand_is_zero_without_orders() {
        let w = tiny_world();
        assert_eq!(w.demand(SkuId(3)).unwrap(), 0);
        assert_eq!(w.demand(SkuId(5000)), Err(WorldError::UnknownSku(SkuId(5000))));
    }

    #[test]
    fn demand_sums_open_lines() {
        let mut w = tiny_world();
        w.add_customer_order(vec![OrderLine::new(SkuId(3), 2)], 0.0).unwrap();
        w.add_customer_order(vec![OrderLine::new(SkuId(3), 5), OrderLine::new(SkuId(4), 1)], 0.0)
            .unwrap();
        // independent summation over the stored orders
        let direct: u64 = w
            .customer_orders
            .values()
            .flat_map(|o| o.lines.iter())
            .filter(|l| l.sku == SkuId(3))
            .map(|l| l.remaining() as u64)
            .sum();
        assert_eq!(direct, 7);
        assert_eq!(w.demand(SkuId(3)).unwrap(), 7);
    }

    #[test]
    fn completed_orders_carry_no_demand() {
        let mut w = tiny_world();
        let pod = w.pods[0].id;
        w.pods[0].add(SkuId(3), 1).unwrap();
        w.initial_units = 1;
        let order = w.add_customer_order(vec![OrderLine::new(SkuId(3), 1)], 0.0).unwrap();
        assert_eq!(w.demand(SkuId(3)).unwrap(), 1);
        assert!(w.pick_unit(pod, order, SkuId(3)));
        assert_eq!(w.demand(SkuId(3)).unwrap(), 0);
        assert!(w.customer_orders.is_empty());
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn fill_level_ratios() {
        let mut w = tiny_world();
        assert_eq!(w.fill_level(), 0.0);
        for p in &mut w.pods {
            p.capacity = 10;
        }
        w.pods[0].add(SkuId(1), 5).unwrap();
        w.pods[1].add(SkuId(2), 10).unwrap();
        assert!((w.fill_level() - 0.75).abs() < 1e-12);
        w.pods[0].add(SkuId(1), 5).unwrap();
        assert_eq!(w.fill_level(), 1.0);
    }

    #[test]
    fn pod_capacity_is_enforced() {
        let mut p = Pod::new(PodId(0), 3, Placement::Carried(RobotId(0)));
        assert!(p.add(SkuId(0), 3).is_ok());
        assert!(p.add(SkuId(1), 1).is_err());
        assert!(p.take_one(SkuId(0)));
        assert!(!p.take_one(SkuId(1)));
        assert_eq!(p.units(), 2);
    }
}
