use crate::error::SimError;
use crate::pathtime::PathTimeParams;
use crate::policy::MechanismConfig;
use crate::world::LayoutSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const HOUR: f64 = 3600.0;
pub const DAY: f64 = 24.0 * HOUR;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicsConfig {
    pub max_speed: f64,
    pub acceleration: f64,
    pub deceleration: f64,
    /// Time for a 90 degree turn on the spot.
    pub turn_time_90: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            max_speed: 1.5,
            acceleration: 0.5,
            deceleration: 0.5,
            turn_time_90: 2.5,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("max_speed", self.max_speed),
            ("acceleration", self.acceleration),
            ("deceleration", self.deceleration),
            ("turn_time_90", self.turn_time_90),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Nightly 22:00 to 06:00 break for all stations.
    DownPeriod,
    /// Continuous operation with constant backlogs.
    Parallel,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::DownPeriod => "down-period",
            ScenarioKind::Parallel => "parallel",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "down-period" => Ok(ScenarioKind::DownPeriod),
            "parallel" => Ok(ScenarioKind::Parallel),
            _ => Err(format!("unknown scenario `{s}` (expected down-period or parallel)")),
        }
    }
}

/// Robots per pick station by role: replenishment, picking, active repositioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RobotSplit {
    R1P3A0,
    R1P2A1,
    R1P3A1,
}

impl RobotSplit {
    pub const ALL: [RobotSplit; 3] = [RobotSplit::R1P3A0, RobotSplit::R1P2A1, RobotSplit::R1P3A1];

    /// `(replenish, pick, reposition)` robots per pick station.
    pub fn per_station(self) -> (usize, usize, usize) {
        match self {
            RobotSplit::R1P3A0 => (1, 3, 0),
            RobotSplit::R1P2A1 => (1, 2, 1),
            RobotSplit::R1P3A1 => (1, 3, 1),
        }
    }

    pub fn robots_per_station(self) -> usize {
        let (r, p, a) = self.per_station();
        r + p + a
    }

    pub fn name(self) -> &'static str {
        match self {
            RobotSplit::R1P3A0 => "R1P3A0",
            RobotSplit::R1P2A1 => "R1P2A1",
            RobotSplit::R1P3A1 => "R1P3A1",
        }
    }
}

impl FromStr for RobotSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RobotSplit::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown robot split `{s}` (expected R1P3A0, R1P2A1 or R1P3A1)"))
    }
}

/// Knobs of the warehouse operation that rarely change between experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub skus: usize,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub pod_capacity: u32,
    pub initial_fill: f64,
    /// Units added per draw when stocking pods at start.
    pub initial_chunk: u32,
    pub customer_backlog: usize,
    pub replenishment_backlog: usize,
    pub night_orders_per_station: usize,
    pub replenishment_fill_target: f64,
    pub replenishment_order_size: u32,
    pub order_lines_min: u32,
    pub order_lines_max: u32,
    /// Orders a pick station works on at once.
    pub station_order_capacity: usize,
    pub pick_unit_time: f64,
    pub replenish_unit_time: f64,
    pub sample_interval: f64,
    pub policy_refresh_interval: f64,
    pub deadlock_timeout: f64,
    pub lane_length: usize,
    pub path: PathTimeParams,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            skus: 1000,
            gamma_shape: 1.0,
            gamma_scale: 2.0,
            pod_capacity: 40,
            initial_fill: 0.75,
            initial_chunk: 5,
            customer_backlog: 2000,
            replenishment_backlog: 200,
            night_orders_per_station: 1500,
            replenishment_fill_target: 0.75,
            replenishment_order_size: 20,
            order_lines_min: 1,
            order_lines_max: 3,
            station_order_capacity: 8,
            pick_unit_time: 10.0,
            replenish_unit_time: 10.0,
            sample_interval: 300.0,
            policy_refresh_interval: 900.0,
            deadlock_timeout: HOUR,
            lane_length: 5,
            path: PathTimeParams::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("gamma_shape", self.gamma_shape),
            ("gamma_scale", self.gamma_scale),
            ("pick_unit_time", self.pick_unit_time),
            ("replenish_unit_time", self.replenish_unit_time),
            ("sample_interval", self.sample_interval),
            ("policy_refresh_interval", self.policy_refresh_interval),
            ("deadlock_timeout", self.deadlock_timeout),
            ("path.cruise_speed", self.path.cruise_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("initial_fill", self.initial_fill),
            ("replenishment_fill_target", self.replenishment_fill_target),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.path.turn_penalty.is_nan() || self.path.turn_penalty < 0.0 {
            return Err("path.turn_penalty must be non-negative".into());
        }
        if self.skus == 0 {
            return Err("skus must be at least 1".into());
        }
        if self.pod_capacity == 0 || self.initial_chunk == 0 || self.replenishment_order_size == 0 {
            return Err("pod_capacity, initial_chunk and replenishment_order_size must be at least 1".into());
        }
        if self.order_lines_min == 0 || self.order_lines_min > self.order_lines_max {
            return Err("order lines need 1 <= order_lines_min <= order_lines_max".into());
        }
        if self.order_lines_max as usize > self.skus {
            return Err("order_lines_max exceeds the number of skus".into());
        }
        if self.station_order_capacity == 0 {
            return Err("station_order_capacity must be at least 1".into());
        }
        if self.lane_length < 2 {
            return Err("lane_length must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Simulated seconds, starting at 06:00 on day one.
    pub horizon: f64,
    pub repetitions: usize,
    /// `active` is what robots actually run: for the down-period scenario
    /// it is used at night, for the parallel scenario by repositioners.
    pub mechanism: MechanismConfig,
    pub layout: LayoutSpec,
    pub seed: u64,
    pub robot_split: RobotSplit,
    pub kinematics: KinematicsConfig,
    pub params: SimParams,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, layout: LayoutSpec, mechanism: MechanismConfig, seed: u64) -> Self {
        Self {
            kind,
            horizon: 7.0 * DAY,
            repetitions: 5,
            mechanism,
            layout,
            seed,
            robot_split: RobotSplit::R1P3A0,
            kinematics: KinematicsConfig::default(),
            params: SimParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return err(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.repetitions == 0 {
            return err("repetitions must be at least 1".into());
        }
        if !self.mechanism.weights.is_valid() {
            return err("scoring weights must be non-negative with a positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.mechanism.cache_fraction) {
            return err("cache_fraction must lie in [0, 1]".into());
        }
        if self.mechanism.active == Some(crate::policy::Mechanism::Nearest) {
            return err("Nearest has no active variant".into());
        }
        self.kinematics.validate().map_err(SimError::Config)?;
        self.params.validate().map_err(SimError::Config)?;
        Ok(())
    }

    /// Hours in `[0, horizon)` during which stations work.
    pub fn active_hours(&self) -> f64 {
        match self.kind {
            ScenarioKind::Parallel => self.horizon / HOUR,
            ScenarioKind::DownPeriod => {
                let mut active = 0.0;
                let mut day_start = 0.0;
                while day_start < self.horizon {
                    let end = (day_start + 16.0 * HOUR).min(self.horizon);
                    active += end - day_start;
                    day_start += DAY;
                }
                active / HOUR
            }
        }
    }
}

/// Seconds since simulation start of the given wall-clock hour on `day` (0-based).
pub fn clock_time(day: u32, hour: f64) -> f64 {
    day as f64 * DAY + (hour - 6.0) * HOUR
}
