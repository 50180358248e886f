//! Event-driven simulation of robots, stations and orders.
//!
//! Robots hold the waypoint they stand on and reserve the next one before
//! moving. A robot that finds its next waypoint taken stops and waits; when
//! the waypoint is released all waiters retry in robot id order.

pub mod allocation;
pub mod config;
pub mod event;
pub mod motion;
pub mod orders;
pub mod result;

pub use allocation::{choose_station, select_pick_pod, select_replenish_pod, units_pickable, SkuIndex};
pub use config::{KinematicsConfig, RobotSplit, ScenarioConfig, ScenarioKind, SimParams, DAY, HOUR};
pub use event::{Event, EventKind, EventQueue, Phase};
pub use motion::{advance_robot, segment_time, time_at_distance};
pub use orders::{gamma_catalog, OrderStream, SkuSampler};
pub use result::{HeatmapGrid, RunResult, Sample, Totals};

use crate::error::SimError;
use crate::graph::{Heading, Point};
use crate::ids::{LocationId, NodeId, OrderId, PodId, RobotId, SkuId, StationId};
use crate::layout::{generate_layout_with, LayoutOptions};
use crate::pathtime::{compute_prominence_field, PathTimeEstimator};
use crate::policy::{self, PolicyState};
use crate::scoring::{world_well_sortedness, ScoreBoard};
use crate::world::{OrderState, Placement, RobotAgent, RobotRole, StationKind, Task, World};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Idle,
    WakePending,
    Moving,
    Turning,
    Blocked,
    Serving,
    Paused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Plan {
    None,
    PickTrip,
    ReplenishTrip,
    /// Returning a pod from a station.
    Store,
    Reposition,
    Park,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DayPhase {
    Day,
    /// Night without active repositioning: everything stands still.
    NightIdle,
    /// Night with active repositioning.
    NightActive,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    t0: f64,
    origin: Point,
    length: f64,
    heading: Heading,
    end: NodeId,
}

#[derive(Clone, Debug)]
struct Bot {
    mode: Mode,
    plan: Plan,
    route: VecDeque<NodeId>,
    seg: Option<Segment>,
    token: u64,
    /// Units promised to the home pick station by the current trip.
    reserved: Vec<(SkuId, u32)>,
    /// Free capacity promised to replenishment by the current trip.
    pending_capacity: u64,
    pickup_time: f64,
    blocked_since: Option<f64>,
    replan: bool,
}

#[derive(Clone, Debug, Default)]
struct StationState {
    reserved: BTreeMap<SkuId, u32>,
    stalled: bool,
    handled: u64,
}

pub struct Simulation {
    config: ScenarioConfig,
    world: World,
    estimator: PathTimeEstimator,
    policy: PolicyState,
    scores: ScoreBoard,
    scores_dirty: bool,
    queue: EventQueue,
    bots: Vec<Bot>,
    owner: Vec<Option<RobotId>>,
    waiters: Vec<Vec<RobotId>>,
    stations: Vec<StationState>,
    sku_index: SkuIndex,
    stock: Vec<u64>,
    committed: Vec<u64>,
    open_orders: BTreeSet<OrderId>,
    stream: OrderStream,
    round_robin: usize,
    phase: DayPhase,
    pending_replenish_capacity: u64,
    completions: VecDeque<f64>,
    trips: VecDeque<(f64, f64)>,
    samples: Vec<Sample>,
    heatmaps: Vec<HeatmapGrid>,
    totals: Totals,
    violations: usize,
    violation_examples: Vec<String>,
    last_movement: f64,
    night_start: f64,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let p = &config.params;
        let opts = LayoutOptions {
            pod_capacity: p.pod_capacity,
            lane_length: p.lane_length,
            pick_unit_time: p.pick_unit_time,
            replenish_unit_time: p.replenish_unit_time,
            path_params: p.path,
        };
        let mut world = generate_layout_with(&config.layout, &opts)?;

        // Random numbers are drawn in a fixed order: catalog weights, then
        // one sub-seed each for stock, customer orders and replenishment.
        let mut master = ChaCha8Rng::seed_from_u64(config.seed);
        let catalog = gamma_catalog(&mut master, p.skus, p.gamma_shape, p.gamma_scale);
        let stock_seed = master.next_u64();
        let customer_seed = master.next_u64();
        let replenish_seed = master.next_u64();
        world.set_catalog(catalog);
        let sampler = SkuSampler::new(&world.catalog);
        orders::stock_initial_inventory(&mut world, &sampler, &mut ChaCha8Rng::seed_from_u64(stock_seed), p)?;
        let stream = OrderStream::new(sampler, customer_seed, replenish_seed, p);

        let mut estimator = PathTimeEstimator::new(world.graph.clone(), p.path);
        let field = compute_prominence_field(&mut estimator, &world)?;
        let policy = PolicyState::new(field, config.mechanism.cache_fraction);

        let mut stock = vec![0u64; world.catalog.len()];
        for pod in &world.pods {
            for (&sku, &n) in &pod.inventory {
                stock[sku.index()] += n as u64;
            }
        }
        let sku_index = SkuIndex::new(&world);
        let scores = ScoreBoard::for_world(&world, config.mechanism.weights);
        let node_count = world.graph.node_count();
        let station_count = world.stations.len();

        let mut sim = Self {
            config: config.clone(),
            estimator,
            policy,
            scores,
            scores_dirty: false,
            queue: EventQueue::new(),
            bots: Vec::new(),
            owner: vec![None; node_count],
            waiters: vec![Vec::new(); node_count],
            stations: vec![StationState::default(); station_count],
            sku_index,
            committed: vec![0; stock.len()],
            stock,
            open_orders: BTreeSet::new(),
            stream,
            round_robin: 0,
            phase: DayPhase::Day,
            pending_replenish_capacity: 0,
            completions: VecDeque::new(),
            trips: VecDeque::new(),
            samples: Vec::new(),
            heatmaps: Vec::new(),
            totals: Totals {
                station_units: vec![0; station_count],
                ..Totals::default()
            },
            violations: 0,
            violation_examples: Vec::new(),
            last_movement: 0.0,
            night_start: 0.0,
            world,
        };
        sim.place_robots()?;
        sim.refill_customer_backlog();
        if config.kind == ScenarioKind::Parallel {
            sim.refill_replenishment_backlog();
        }
        sim.assign_orders();
        sim.refresh_scores();
        sim.policy.refresh_threshold(&sim.scores);
        sim.schedule_fixed_events();
        for r in 0..sim.bots.len() {
            sim.bots[r].mode = Mode::WakePending;
            sim.schedule_robot(RobotId::from_index(r), 0.0, false);
        }
        Ok(sim)
    }

    fn place_robots(&mut self) -> Result<(), SimError> {
        let (replenish, pick, reposition) = self.config.robot_split.per_station();
        let pick_ids: Vec<StationId> = self.world.pick_stations().map(|s| s.id).collect();
        let replen_ids: Vec<StationId> = self.world.replenish_stations().map(|s| s.id).collect();
        let mut roles = Vec::new();
        for (i, &s) in pick_ids.iter().enumerate() {
            for _ in 0..replenish {
                roles.push(RobotRole::ReplenishSupply(replen_ids[i % replen_ids.len()]));
            }
            for _ in 0..pick {
                roles.push(RobotRole::PickSupply(s));
            }
            for _ in 0..reposition {
                roles.push(RobotRole::Repositioner);
            }
        }
        // Robots start parked on the least prominent empty locations.
        let mut spots: Vec<LocationId> = self
            .world
            .locations
            .iter()
            .filter(|l| l.occupant.is_none())
            .map(|l| l.id)
            .collect();
        let prom = &self.policy.prominence;
        spots.sort_by(|a, b| prom.get(*b).total_cmp(&prom.get(*a)).then(a.cmp(b)));
        if spots.len() < roles.len() {
            return Err(SimError::Config(format!(
                "{} robots need parking but only {} storage locations are empty",
                roles.len(),
                spots.len()
            )));
        }
        for (i, role) in roles.into_iter().enumerate() {
            let id = RobotId::from_index(i);
            let loc = spots[i];
            let node = self.world.location(loc).waypoint;
            self.world.locations[loc.index()].claim = Some(id);
            self.owner[node.index()] = Some(id);
            self.world.robots.push(RobotAgent {
                id,
                node,
                position: self.world.graph.point(node),
                heading: Heading::North,
                speed: 0.0,
                role,
                carried: None,
                tasks: VecDeque::new(),
            });
            self.bots.push(Bot {
                mode: Mode::Idle,
                plan: Plan::None,
                route: VecDeque::new(),
                seg: None,
                token: 0,
                reserved: Vec::new(),
                pending_capacity: 0,
                pickup_time: 0.0,
                blocked_since: None,
                replan: false,
            });
        }
        Ok(())
    }

    fn schedule_fixed_events(&mut self) {
        let horizon = self.config.horizon;
        if self.config.kind == ScenarioKind::DownPeriod {
            let mut day = 0;
            while config::clock_time(day, 6.0) <= horizon {
                for (hour, phase) in [
                    (16.0, Phase::Replenish),
                    (22.0, Phase::NightStart),
                    (30.0, Phase::DayStart),
                ] {
                    let t = config::clock_time(day, hour);
                    if t <= horizon {
                        self.queue.schedule(t, EventKind::PhaseChange(phase));
                    }
                }
                day += 1;
            }
        }
        let interval = self.config.params.sample_interval;
        let mut k = 0u64;
        while k as f64 * interval <= horizon {
            self.queue.schedule(k as f64 * interval, EventKind::MetricSample);
            k += 1;
        }
        let refresh = self.config.params.policy_refresh_interval;
        if refresh <= horizon {
            self.queue.schedule(refresh, EventKind::PolicyRefresh);
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn policy_state(&self) -> &PolicyState {
        &self.policy
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Current combined scores of all pods.
    pub fn scores(&mut self) -> &ScoreBoard {
        self.refresh_scores();
        &self.scores
    }

    /// Storage location of every pod, `None` while carried or at a station.
    pub fn pod_locations(&self) -> Vec<Option<LocationId>> {
        self.world.pods.iter().map(|p| p.stored_at()).collect()
    }

    /// Processes every event up to and including time `t`.
    pub fn run_until(&mut self, t: f64) -> Result<(), SimError> {
        let end = t.min(self.config.horizon);
        while let Some(next) = self.queue.peek_time() {
            if next > end {
                break;
            }
            let e = self.queue.pop().expect("peeked");
            self.world.clock = e.time;
            self.handle(e)?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<RunResult, SimError> {
        self.run_until(self.config.horizon)?;
        Ok(self.finish())
    }

    pub fn finish(self) -> RunResult {
        let active_hours = self.config.active_hours();
        let units = self.world.units_picked as f64;
        let per_hour = if active_hours > 0.0 { units / active_hours } else { 0.0 };
        let pick_stations = self.world.pick_station_count();
        let utrs = crate::scoring::utrs(per_hour, pick_stations, self.config.params.pick_unit_time);
        let mut totals = self.totals;
        totals.units_picked = self.world.units_picked;
        totals.units_replenished = self.world.units_replenished;
        RunResult {
            layout: self.config.layout.name.clone(),
            scenario: self.config.kind,
            mechanism: self.config.mechanism.pair().to_string(),
            robot_split: self.config.robot_split,
            seed: self.config.seed,
            horizon_s: self.config.horizon,
            active_hours,
            units_per_active_hour: per_hour,
            utrs,
            samples: self.samples,
            totals,
            heatmaps: self.heatmaps,
            invariant_violations: self.violations,
            violation_examples: self.violation_examples,
        }
    }

    fn now_t(&self) -> f64 {
        self.queue.now()
    }

    fn refresh_scores(&mut self) {
        if self.scores_dirty {
            self.scores = ScoreBoard::for_world(&self.world, self.config.mechanism.weights);
            self.scores_dirty = false;
        }
    }

    fn schedule_robot(&mut self, r: RobotId, time: f64, arrival: bool) {
        let bot = &mut self.bots[r.index()];
        bot.token += 1;
        let token = bot.token;
        let kind = if arrival {
            EventKind::RobotArrival { robot: r, token }
        } else {
            EventKind::RobotReady { robot: r, token }
        };
        self.queue.schedule(time, kind);
    }

    fn handle(&mut self, e: Event) -> Result<(), SimError> {
        match e.kind {
            EventKind::RobotArrival { robot, token } => {
                if self.bots[robot.index()].token == token {
                    self.on_arrival(robot)?;
                }
            }
            EventKind::RobotReady { robot, token } => {
                if self.bots[robot.index()].token == token {
                    match self.bots[robot.index()].mode {
                        Mode::Idle | Mode::WakePending => self.request_work(robot)?,
                        Mode::Turning | Mode::Blocked | Mode::Paused => self.drive(robot)?,
                        Mode::Moving | Mode::Serving => {}
                    }
                }
            }
            EventKind::StationUnitHandled { station } => self.on_unit_handled(station)?,
            EventKind::PhaseChange(phase) => self.on_phase(phase)?,
            EventKind::MetricSample => self.on_sample()?,
            EventKind::PolicyRefresh => {
                self.refresh_scores();
                self.policy.refresh_threshold(&self.scores);
                let next = self.now_t() + self.config.params.policy_refresh_interval;
                if next <= self.config.horizon {
                    self.queue.schedule(next, EventKind::PolicyRefresh);
                }
                self.wake_idle(|sim, r| sim.uses_active(r));
            }
        }
        Ok(())
    }

    /// Whether the robot currently works on active repositioning.
    fn uses_active(&self, r: RobotId) -> bool {
        self.config.mechanism.active.is_some()
            && (self.phase == DayPhase::NightActive || self.world.robots[r.index()].role == RobotRole::Repositioner)
    }

    fn wake_idle<F>(&mut self, filter: F)
    where
        F: Fn(&Self, RobotId) -> bool,
    {
        if self.phase == DayPhase::NightIdle {
            return;
        }
        let now = self.now_t();
        for i in 0..self.bots.len() {
            let r = RobotId::from_index(i);
            if self.bots[i].mode == Mode::Idle && filter(self, r) {
                self.bots[i].mode = Mode::WakePending;
                self.schedule_robot(r, now, false);
            }
        }
    }

    // ---- motion -------------------------------------------------------

    fn drive(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        if self.phase == DayPhase::NightIdle {
            self.bots[i].seg = None;
            self.bots[i].mode = Mode::Paused;
            self.world.robots[i].speed = 0.0;
            return Ok(());
        }
        if self.bots[i].replan {
            self.bots[i].replan = false;
            self.bots[i].seg = None;
            self.bots[i].route.clear();
            if let Some(target) = self.task_target(r) {
                self.set_route(r, target)?;
            }
        }
        let cur = self.world.robots[i].node;
        let Some(&next) = self.bots[i].route.front() else {
            self.bots[i].seg = None;
            self.world.robots[i].speed = 0.0;
            if self.world.robots[i].tasks.is_empty() {
                return self.request_work(r);
            }
            return self.handle_destination(r);
        };
        let graph = self.world.graph.clone();
        let heading = graph.edge(cur, next).expect("routes follow graph edges").heading;
        if self.bots[i].seg.is_some_and(|s| s.heading != heading) {
            self.bots[i].seg = None;
        }
        if self.bots[i].seg.is_none() {
            let turns = self.world.robots[i].heading.quarter_turns_to(heading);
            if turns > 0 {
                self.world.robots[i].heading = heading;
                self.world.robots[i].speed = 0.0;
                self.bots[i].mode = Mode::Turning;
                let t = self.now_t() + turns as f64 * self.config.kinematics.turn_time_90;
                self.schedule_robot(r, t, false);
                return Ok(());
            }
            let mut end = next;
            let mut prev = next;
            for &n in self.bots[i].route.iter().skip(1) {
                if graph.edge(prev, n).map(|e| e.heading) != Some(heading) {
                    break;
                }
                end = n;
                prev = n;
            }
            let origin = graph.point(cur);
            self.bots[i].seg = Some(Segment {
                t0: self.now_t(),
                origin,
                length: origin.distance(graph.point(end)),
                heading,
                end,
            });
        }
        match self.owner[next.index()] {
            Some(o) if o != r => {
                let bot = &mut self.bots[i];
                bot.seg = None;
                bot.mode = Mode::Blocked;
                bot.blocked_since.get_or_insert(self.queue.now());
                self.world.robots[i].speed = 0.0;
                if !self.waiters[next.index()].contains(&r) {
                    self.waiters[next.index()].push(r);
                }
                return Ok(());
            }
            _ => {}
        }
        self.owner[next.index()] = Some(r);
        let seg = self.bots[i].seg.expect("segment set above");
        let x = seg.origin.distance(graph.point(next));
        let t = (seg.t0 + time_at_distance(x, seg.length, &self.config.kinematics)).max(self.now_t());
        self.bots[i].mode = Mode::Moving;
        self.bots[i].blocked_since = None;
        self.world.robots[i].speed = self.config.kinematics.max_speed;
        self.schedule_robot(r, t, true);
        Ok(())
    }

    fn on_arrival(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        let next = self.bots[i].route.pop_front().expect("arrival without route");
        if self.owner[next.index()] != Some(r) {
            return Err(SimError::Collision {
                robot: r,
                node: next,
                owner: self.owner[next.index()],
            });
        }
        let prev = self.world.robots[i].node;
        self.release_node(prev);
        if let Some(loc) = self.world.location_at(prev) {
            let still_needed = self.world.robots[i].tasks.iter().any(|t| t.location() == Some(loc));
            if self.world.locations[loc.index()].claim == Some(r) && !still_needed {
                self.world.locations[loc.index()].claim = None;
            }
        }
        let from = self.world.graph.point(prev);
        let to = self.world.graph.point(next);
        self.totals.distance_traveled += from.distance(to);
        let robot = &mut self.world.robots[i];
        robot.node = next;
        robot.position = to;
        self.last_movement = self.queue.now();
        if self.bots[i].seg.is_some_and(|s| s.end == next) {
            self.bots[i].seg = None;
        }
        self.drive(r)
    }

    fn release_node(&mut self, node: NodeId) {
        self.owner[node.index()] = None;
        let mut waiting = std::mem::take(&mut self.waiters[node.index()]);
        waiting.sort();
        let now = self.now_t();
        for w in waiting {
            if self.bots[w.index()].mode == Mode::Blocked {
                self.schedule_robot(w, now, false);
            }
        }
    }

    fn task_target(&self, r: RobotId) -> Option<NodeId> {
        self.world.robots[r.index()].tasks.front().map(|t| match *t {
            Task::PickUp { location, .. } | Task::SetDown { location, .. } | Task::Park { location } => {
                self.world.location(location).waypoint
            }
            Task::Visit { station } => self.world.station(station).waypoint,
        })
    }

    fn set_route(&mut self, r: RobotId, target: NodeId) -> Result<(), SimError> {
        let from = self.world.robots[r.index()].node;
        let route = self
            .estimator
            .route(from, target)
            .ok_or(SimError::NoRoute { from, to: target })?;
        self.bots[r.index()].route = route.nodes.into_iter().skip(1).collect();
        Ok(())
    }

    fn next_task(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        match self.task_target(r) {
            None => {
                self.bots[i].plan = Plan::None;
                self.request_work(r)
            }
            Some(target) => {
                self.bots[i].mode = Mode::Moving;
                self.set_route(r, target)?;
                self.drive(r)
            }
        }
    }

    fn handle_destination(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        let task = *self.world.robots[i].tasks.front().expect("destination without task");
        match task {
            Task::PickUp { pod, .. } => {
                self.world.lift_pod(pod, r);
                self.world.pods[pod.index()].reserved_by = None;
                self.bots[i].pickup_time = self.now_t();
                self.world.robots[i].tasks.pop_front();
                self.next_task(r)
            }
            Task::Visit { station } => {
                let pod = self.world.robots[i].carried.expect("visiting without a pod");
                self.world.pods[pod.index()].placement = Placement::AtStation(station);
                self.world.stations[station.index()].serving = Some(r);
                self.bots[i].mode = Mode::Serving;
                match self.world.station(station).kind {
                    StationKind::Pick => {
                        let now = self.now_t();
                        self.trips.push_back((now, now - self.bots[i].pickup_time));
                        self.totals.pick_trips += 1;
                    }
                    StationKind::Replenish => {
                        self.pending_replenish_capacity -= self.bots[i].pending_capacity;
                        self.bots[i].pending_capacity = 0;
                        self.totals.replenish_trips += 1;
                    }
                }
                self.continue_service(station)
            }
            Task::SetDown { pod, location } => {
                self.world.store_pod(pod, location);
                self.world.robots[i].carried = None;
                self.world.robots[i].tasks.pop_front();
                if self.bots[i].plan == Plan::Reposition {
                    self.totals.moves_executed += 1;
                }
                self.wake_idle(|_, _| true);
                self.next_task(r)
            }
            Task::Park { .. } => {
                self.world.robots[i].tasks.pop_front();
                self.bots[i].plan = Plan::None;
                self.bots[i].mode = Mode::Idle;
                Ok(())
            }
        }
    }

    // ---- work assignment ------------------------------------------------

    fn request_work(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        if self.phase == DayPhase::NightIdle {
            self.bots[i].mode = Mode::Paused;
            return Ok(());
        }
        debug_assert!(self.world.robots[i].tasks.is_empty());
        if self.phase == DayPhase::NightActive || self.world.robots[i].role == RobotRole::Repositioner {
            if self.try_active_move(r)? {
                return Ok(());
            }
            return self.go_idle(r);
        }
        match self.world.robots[i].role {
            RobotRole::PickSupply(s) => {
                if self.phase == DayPhase::Day && self.try_pick_trip(r, s)? {
                    return Ok(());
                }
            }
            RobotRole::ReplenishSupply(s) => {
                if self.phase == DayPhase::Day && self.try_replenish_trip(r, s)? {
                    return Ok(());
                }
            }
            RobotRole::Repositioner => unreachable!(),
        }
        self.go_idle(r)
    }

    fn try_active_move(&mut self, r: RobotId) -> Result<bool, SimError> {
        let Some(active) = self.config.mechanism.active else {
            return Ok(false);
        };
        self.refresh_scores();
        let Some(moves) =
            policy::next_active_move(active, &self.world, &mut self.estimator, &self.policy, &self.scores)
        else {
            return Ok(false);
        };
        let i = r.index();
        for m in &moves {
            self.world.pods[m.pod.index()].reserved_by = Some(r);
            self.world.locations[m.from.index()].claim = Some(r);
            self.world.locations[m.to.index()].claim = Some(r);
            let tasks = &mut self.world.robots[i].tasks;
            tasks.push_back(Task::PickUp {
                pod: m.pod,
                location: m.from,
            });
            tasks.push_back(Task::SetDown {
                pod: m.pod,
                location: m.to,
            });
        }
        self.bots[i].plan = Plan::Reposition;
        self.next_task(r)?;
        Ok(true)
    }

    /// Unreserved units still needed by the orders assigned to a pick station.
    fn station_need(&self, s: StationId) -> BTreeMap<SkuId, u32> {
        let mut need: BTreeMap<SkuId, u32> = BTreeMap::new();
        for id in &self.world.station(s).assigned {
            if let Some(o) = self.world.customer_orders.get(id) {
                for l in &o.lines {
                    if l.remaining() > 0 {
                        *need.entry(l.sku).or_default() += l.remaining();
                    }
                }
            }
        }
        for (sku, &n) in &self.stations[s.index()].reserved {
            if let Some(v) = need.get_mut(sku) {
                *v = v.saturating_sub(n);
            }
        }
        need.retain(|_, v| *v > 0);
        need
    }

    fn try_pick_trip(&mut self, r: RobotId, s: StationId) -> Result<bool, SimError> {
        let need = self.station_need(s);
        if need.is_empty() {
            return Ok(false);
        }
        let i = r.index();
        let times = self.estimator.times_from(self.world.robots[i].node);
        let Some((pod, _)) = select_pick_pod(&self.world, &self.sku_index, &need, &times) else {
            return Ok(false);
        };
        let mut reserved = Vec::new();
        for (&sku, &n) in &need {
            let take = self.world.pod(pod).count(sku).min(n);
            if take > 0 {
                reserved.push((sku, take));
                *self.stations[s.index()].reserved.entry(sku).or_default() += take;
            }
        }
        self.bots[i].reserved = reserved;
        self.start_trip(r, pod, s, Plan::PickTrip)?;
        Ok(true)
    }

    fn try_replenish_trip(&mut self, r: RobotId, s: StationId) -> Result<bool, SimError> {
        let outstanding: u64 = self
            .world
            .replenishment_orders
            .values()
            .map(|o| o.remaining() as u64)
            .sum();
        if outstanding <= self.pending_replenish_capacity {
            return Ok(false);
        }
        let times = self.estimator.times_from(self.world.station(s).waypoint);
        let Some(pod) = select_replenish_pod(&self.world, &times) else {
            return Ok(false);
        };
        let cap = self.world.pod(pod).free_capacity() as u64;
        self.pending_replenish_capacity += cap;
        self.bots[r.index()].pending_capacity = cap;
        self.start_trip(r, pod, s, Plan::ReplenishTrip)?;
        Ok(true)
    }

    fn start_trip(&mut self, r: RobotId, pod: PodId, s: StationId, plan: Plan) -> Result<(), SimError> {
        let loc = self.world.pod(pod).stored_at().expect("trip pods are stored");
        self.world.pods[pod.index()].reserved_by = Some(r);
        self.world.locations[loc.index()].claim = Some(r);
        self.world.stations[s.index()].queue.push_back(r);
        let i = r.index();
        let tasks = &mut self.world.robots[i].tasks;
        tasks.push_back(Task::PickUp { pod, location: loc });
        tasks.push_back(Task::Visit { station: s });
        self.bots[i].plan = plan;
        self.next_task(r)
    }

    /// Idle robots park on a free storage location so they never block aisles.
    fn go_idle(&mut self, r: RobotId) -> Result<(), SimError> {
        let i = r.index();
        self.bots[i].plan = Plan::None;
        self.bots[i].mode = Mode::Idle;
        let node = self.world.robots[i].node;
        if let Some(loc) = self.world.location_at(node) {
            let l = self.world.location(loc);
            if l.claim == Some(r) && l.occupant.is_none() {
                return Ok(());
            }
        }
        let times = self.estimator.times_from(node);
        let spot = self
            .world
            .locations
            .iter()
            .filter(|l| l.is_available() && times[l.waypoint.index()].is_finite())
            .min_by(|a, b| {
                times[a.waypoint.index()]
                    .total_cmp(&times[b.waypoint.index()])
                    .then(a.id.cmp(&b.id))
            })
            .map(|l| l.id);
        let Some(spot) = spot else {
            return Ok(());
        };
        self.world.locations[spot.index()].claim = Some(r);
        self.world.robots[i].tasks.push_back(Task::Park { location: spot });
        self.bots[i].plan = Plan::Park;
        self.next_task(r)
    }

    fn release_trip_reservations(&mut self, r: RobotId) {
        let i = r.index();
        if let RobotRole::PickSupply(s) = self.world.robots[i].role {
            let reserved = std::mem::take(&mut self.bots[i].reserved);
            let st = &mut self.stations[s.index()];
            for (sku, n) in reserved {
                if let Some(v) = st.reserved.get_mut(&sku) {
                    *v -= n;
                    if *v == 0 {
                        st.reserved.remove(&sku);
                    }
                }
            }
        }
        self.pending_replenish_capacity -= self.bots[i].pending_capacity;
        self.bots[i].pending_capacity = 0;
        for st in &mut self.world.stations {
            st.queue.retain(|&q| q != r);
        }
    }

    /// Sends a carried pod to storage, chosen by the passive mechanism
    /// from the robot's current position.
    fn store_carried_pod(&mut self, r: RobotId, release: NodeId) -> Result<(), SimError> {
        let i = r.index();
        let pod = self.world.robots[i].carried.expect("storing without a pod");
        self.refresh_scores();
        let loc = policy::choose_passive_location(
            &self.config.mechanism,
            pod,
            release,
            &self.world,
            &mut self.estimator,
            &self.policy,
            &self.scores,
        )?;
        self.world.locations[loc.index()].claim = Some(r);
        self.world.robots[i]
            .tasks
            .push_back(Task::SetDown { pod, location: loc });
        self.bots[i].plan = Plan::Store;
        Ok(())
    }

    // ---- stations ---------------------------------------------------------

    /// Next unit the station can handle with the pod in front of it.
    fn next_unit(&self, s: StationId) -> Option<(OrderId, Option<SkuId>)> {
        let station = self.world.station(s);
        let r = station.serving?;
        let pod = self.world.pod(self.world.robots[r.index()].carried?);
        match station.kind {
            StationKind::Pick => station.assigned.iter().find_map(|id| {
                let o = self.world.customer_orders.get(id)?;
                o.lines
                    .iter()
                    .find(|l| l.remaining() > 0 && pod.count(l.sku) > 0)
                    .map(|l| (*id, Some(l.sku)))
            }),
            StationKind::Replenish => {
                if pod.free_capacity() == 0 {
                    return None;
                }
                self.world
                    .replenishment_orders
                    .values()
                    .find(|o| o.remaining() > 0)
                    .map(|o| (o.id, None))
            }
        }
    }

    fn continue_service(&mut self, s: StationId) -> Result<(), SimError> {
        if self.phase != DayPhase::Day {
            self.stations[s.index()].stalled = true;
            return Ok(());
        }
        if self.next_unit(s).is_none() {
            return self.end_visit(s);
        }
        let t = self.now_t() + self.world.station(s).unit_handling_time;
        self.queue.schedule(t, EventKind::StationUnitHandled { station: s });
        Ok(())
    }

    fn on_unit_handled(&mut self, s: StationId) -> Result<(), SimError> {
        if let Some((order, sku)) = self.next_unit(s) {
            let r = self.world.station(s).serving.expect("unit without robot");
            let pod = self.world.robots[r.index()].carried.expect("unit without pod");
            match sku {
                Some(sku) => {
                    let done = self.world.pick_unit(pod, order, sku);
                    self.stock[sku.index()] -= 1;
                    self.committed[sku.index()] -= 1;
                    self.sku_index.update(&self.world, pod, sku);
                    if done {
                        self.world.stations[s.index()].assigned.retain(|&o| o != order);
                        self.completions.push_back(self.now_t());
                        self.totals.orders_completed += 1;
                        self.refill_customer_backlog();
                        self.assign_orders();
                    }
                }
                None => {
                    let sku = self.world.replenishment_orders[&order].sku;
                    let done = self.world.load_unit(pod, order)?;
                    self.stock[sku.index()] += 1;
                    self.sku_index.update(&self.world, pod, sku);
                    if done && self.config.kind == ScenarioKind::Parallel {
                        self.refill_replenishment_backlog();
                    }
                }
            }
            self.scores_dirty = true;
            self.stations[s.index()].handled += 1;
            self.totals.station_units[s.index()] += 1;
        }
        self.continue_service(s)
    }

    fn end_visit(&mut self, s: StationId) -> Result<(), SimError> {
        let r = self.world.stations[s.index()]
            .serving
            .take()
            .expect("ending a visit without robot");
        let i = r.index();
        let pod = self.world.robots[i].carried.expect("visit without pod");
        self.world.pods[pod.index()].placement = Placement::Carried(r);
        let visit = self.world.robots[i].tasks.pop_front();
        debug_assert!(matches!(visit, Some(Task::Visit { .. })));
        self.release_trip_reservations(r);
        let release = self.world.station(s).waypoint;
        self.store_carried_pod(r, release)?;
        self.bots[i].mode = Mode::Moving;
        self.wake_idle(|sim, w| matches!(sim.world.robots[w.index()].role, RobotRole::PickSupply(x) if x == s));
        self.next_task(r)
    }

    // ---- orders -------------------------------------------------------------

    fn refill_customer_backlog(&mut self) {
        let now = self.now_t();
        while self.world.customer_orders.len() < self.config.params.customer_backlog {
            self.add_customer_order(now);
        }
    }

    fn add_customer_order(&mut self, now: f64) {
        let lines = self.stream.customer_lines();
        let id = self
            .world
            .add_customer_order(lines, now)
            .expect("order stream only draws catalog skus");
        self.open_orders.insert(id);
        self.scores_dirty = true;
    }

    fn refill_replenishment_backlog(&mut self) {
        while self.world.replenishment_orders.len() < self.config.params.replenishment_backlog {
            let (sku, qty) = self.stream.replenishment();
            self.world.add_replenishment_order(sku, qty);
        }
        self.wake_idle(|sim, r| matches!(sim.world.robots[r.index()].role, RobotRole::ReplenishSupply(_)));
    }

    fn order_feasible(&self, id: OrderId) -> bool {
        self.world.customer_orders[&id].lines.iter().all(|l| {
            let i = l.sku.index();
            self.stock[i].saturating_sub(self.committed[i]) >= l.remaining() as u64
        })
    }

    /// Gives open orders whose units are in stock to the pick stations with
    /// the shortest order lists.
    fn assign_orders(&mut self) {
        if self.phase != DayPhase::Day {
            return;
        }
        let cap = self.config.params.station_order_capacity;
        let picks: Vec<StationId> = self.world.pick_stations().map(|s| s.id).collect();
        if picks.is_empty() {
            return;
        }
        let mut loads: Vec<usize> = picks.iter().map(|s| self.world.station(*s).assigned.len()).collect();
        if loads.iter().all(|&l| l >= cap) {
            return;
        }
        let candidates: Vec<OrderId> = self.open_orders.iter().copied().collect();
        let mut touched = BTreeSet::new();
        for id in candidates {
            let Some(si) = choose_station(&loads, cap, self.round_robin) else {
                break;
            };
            if !self.order_feasible(id) {
                continue;
            }
            let s = picks[si];
            self.open_orders.remove(&id);
            let order = self.world.customer_orders.get_mut(&id).expect("open order exists");
            order.state = OrderState::Assigned(s);
            for l in &order.lines {
                self.committed[l.sku.index()] += l.remaining() as u64;
            }
            self.world.stations[s.index()].assigned.push_back(id);
            loads[si] += 1;
            self.round_robin = (si + 1) % picks.len();
            touched.insert(s);
        }
        for s in touched {
            self.wake_idle(|sim, r| matches!(sim.world.robots[r.index()].role, RobotRole::PickSupply(x) if x == s));
        }
    }

    // ---- scenario ---------------------------------------------------------

    fn on_phase(&mut self, phase: Phase) -> Result<(), SimError> {
        match phase {
            Phase::Replenish => {
                let p = &self.config.params;
                let target = p.replenishment_fill_target * self.world.total_capacity() as f64;
                let outstanding: u64 = self
                    .world
                    .replenishment_orders
                    .values()
                    .map(|o| o.remaining() as u64)
                    .sum();
                let missing = target - self.world.total_units() as f64 - outstanding as f64;
                if missing > 0.0 {
                    let count = (missing / p.replenishment_order_size as f64).ceil() as usize;
                    for _ in 0..count {
                        let (sku, qty) = self.stream.replenishment();
                        self.world.add_replenishment_order(sku, qty);
                    }
                }
                self.wake_idle(|sim, r| matches!(sim.world.robots[r.index()].role, RobotRole::ReplenishSupply(_)));
            }
            Phase::NightStart => {
                let now = self.now_t();
                self.night_start = now;
                let extra = self.config.params.night_orders_per_station * self.world.pick_station_count();
                for _ in 0..extra {
                    self.add_customer_order(now);
                }
                self.refresh_scores();
                self.policy.refresh_threshold(&self.scores);
                if self.config.mechanism.active.is_some() {
                    self.phase = DayPhase::NightActive;
                    self.divert_for_night()?;
                } else {
                    self.phase = DayPhase::NightIdle;
                }
                self.heatmaps.push(HeatmapGrid::capture(&self.world, &self.scores, now));
            }
            Phase::DayStart => {
                let now = self.now_t();
                let was = self.phase;
                self.phase = DayPhase::Day;
                self.last_movement = now;
                let paused = now - self.night_start;
                for i in 0..self.bots.len() {
                    let waiting = self.bots[i].mode != Mode::Serving && self.world.robots[i].carried.is_some();
                    if self.bots[i].plan == Plan::PickTrip && waiting {
                        // trip times only count working hours
                        self.bots[i].pickup_time += paused;
                    }
                    if self.bots[i].blocked_since.is_some() {
                        self.bots[i].blocked_since = Some(now);
                    }
                    if self.bots[i].mode == Mode::Paused {
                        self.schedule_robot(RobotId::from_index(i), now, false);
                    }
                }
                let _ = was;
                for s in 0..self.stations.len() {
                    if std::mem::take(&mut self.stations[s].stalled) {
                        self.continue_service(StationId::from_index(s))?;
                    }
                }
                self.refresh_scores();
                self.policy.refresh_threshold(&self.scores);
                self.assign_orders();
                self.wake_idle(|_, _| true);
                self.heatmaps.push(HeatmapGrid::capture(&self.world, &self.scores, now));
            }
        }
        Ok(())
    }

    /// At night robots without a pod for a station turn to repositioning.
    /// Robots already carrying a pod to a station queue there until morning;
    /// moves and returns already under way are finished first.
    fn divert_for_night(&mut self) -> Result<(), SimError> {
        let now = self.now_t();
        for i in 0..self.bots.len() {
            let r = RobotId::from_index(i);
            match self.bots[i].plan {
                Plan::PickTrip | Plan::ReplenishTrip => {
                    if self.world.robots[i].carried.is_some() {
                        continue;
                    }
                    if let Some(Task::PickUp { pod, location }) = self.world.robots[i].tasks.front().copied() {
                        self.world.pods[pod.index()].reserved_by = None;
                        self.release_claim_unless_inside(r, location);
                    }
                    self.world.robots[i].tasks.clear();
                    self.release_trip_reservations(r);
                    self.bots[i].plan = Plan::None;
                    self.bots[i].replan = true;
                }
                Plan::Park => {
                    if let Some(Task::Park { location }) = self.world.robots[i].tasks.front().copied() {
                        self.release_claim_unless_inside(r, location);
                    }
                    self.world.robots[i].tasks.clear();
                    self.bots[i].plan = Plan::None;
                    self.bots[i].replan = true;
                }
                Plan::None | Plan::Store | Plan::Reposition => {}
            }
            match self.bots[i].mode {
                Mode::Blocked => {
                    for w in &mut self.waiters {
                        w.retain(|&x| x != r);
                    }
                    self.schedule_robot(r, now, false);
                }
                Mode::Idle => {
                    self.bots[i].mode = Mode::WakePending;
                    self.schedule_robot(r, now, false);
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn release_claim_unless_inside(&mut self, r: RobotId, location: LocationId) {
        let inside = self.world.robots[r.index()].node == self.world.location(location).waypoint;
        if !inside && self.world.locations[location.index()].claim == Some(r) {
            self.world.locations[location.index()].claim = None;
        }
    }

    // ---- metrics ------------------------------------------------------------

    fn on_sample(&mut self) -> Result<(), SimError> {
        let now = self.now_t();
        self.refresh_scores();
        while self.completions.front().is_some_and(|&t| t <= now - HOUR) {
            self.completions.pop_front();
        }
        while self.trips.front().is_some_and(|&(t, _)| t <= now - HOUR) {
            self.trips.pop_front();
        }
        let mean_trip =
            (!self.trips.is_empty()).then(|| self.trips.iter().map(|&(_, d)| d).sum::<f64>() / self.trips.len() as f64);
        let ws = world_well_sortedness(&self.world, &self.policy.ranks, &self.scores);
        self.samples.push(Sample {
            time_s: now,
            orders_per_hour: self.completions.len() as f64,
            well_sortedness: ws.average,
            mean_trip_time_to_pick: mean_trip,
            fill_level: self.world.fill_level(),
        });
        let problems = self.check_invariants();
        self.violations += problems.len();
        for p in problems {
            if self.violation_examples.len() < 10 {
                self.violation_examples.push(format!("t={now}: {p}"));
            }
        }
        self.check_deadlock()
    }

    /// World invariants plus the engine's own bookkeeping.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = self.world.check_invariants();
        let station_picked: u64 = self
            .world
            .stations
            .iter()
            .filter(|s| s.kind == StationKind::Pick)
            .map(|s| self.stations[s.id.index()].handled)
            .sum();
        if station_picked != self.world.units_picked {
            problems.push(format!(
                "stations handled {station_picked} picks but {} units were picked",
                self.world.units_picked
            ));
        }
        for (i, robot) in self.world.robots.iter().enumerate() {
            if self.owner[robot.node.index()] != Some(RobotId::from_index(i)) {
                problems.push(format!("{} stands on {} without holding it", robot.id, robot.node));
            }
        }
        let mut nodes: Vec<NodeId> = self.world.robots.iter().map(|r| r.node).collect();
        nodes.sort();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            problems.push("two robots share a waypoint".into());
        }
        problems
    }

    fn check_deadlock(&self) -> Result<(), SimError> {
        if self.phase == DayPhase::NightIdle {
            return Ok(());
        }
        let now = self.now_t();
        let limit = self.config.params.deadlock_timeout;
        let night = self.phase != DayPhase::Day;
        let waiting: Vec<usize> = (0..self.bots.len())
            .filter(|&i| self.bots[i].mode == Mode::Blocked)
            .filter(|&i| !(night && matches!(self.bots[i].plan, Plan::PickTrip | Plan::ReplenishTrip)))
            .collect();
        let stuck = waiting
            .iter()
            .filter_map(|&i| self.bots[i].blocked_since.map(|t| (i, now - t)))
            .find(|&(_, d)| d > limit);
        let busy = self.world.robots.iter().any(|r| !r.tasks.is_empty());
        let stalled = now - self.last_movement;
        if stuck.is_some() || (!night && busy && !waiting.is_empty() && stalled > limit) {
            let detail = waiting
                .iter()
                .take(8)
                .map(|&i| {
                    let node = self.bots[i].route.front().copied();
                    format!(
                        "{} at {} waits for {:?} held by {:?}",
                        self.world.robots[i].id,
                        self.world.robots[i].node,
                        node,
                        node.and_then(|n| self.owner[n.index()])
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(SimError::Deadlock {
                time: now,
                stalled: stuck.map(|(_, d)| d).unwrap_or(stalled),
                waiting: waiting.len(),
                detail,
            });
        }
        Ok(())
    }
}

/// Runs one scenario to its horizon.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, SimError> {
    Simulation::new(config)?.run()
}
