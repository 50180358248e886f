//! Experiment files: a TOML document naming layouts, mechanism pairs and
//! setups. Every combination becomes one cell of the plan.
//!
//! ```toml
//! layout = ["Small", "Long"]          # built-in name, inline spec, or a list
//! mechanism = ["N-U", "N-C"]          # passive-active, "none" for no active part
//! setup = ["deactivated", "activated"]
//! horizon_hours = 48
//! repetitions = 3
//! base_seed = 7
//!
//! [simulation]
//! station_order_capacity = 8
//! ```

use crate::engine::{KinematicsConfig, RobotSplit, ScenarioConfig, ScenarioKind, SimParams, HOUR};
use crate::error::ConfigError;
use crate::policy::{MechanismConfig, MechanismPair};
use crate::scoring::ScoringWeights;
use crate::world::LayoutSpec;
use serde::de::value::{MapAccessDeserializer, SeqAccessDeserializer, StrDeserializer};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use std::marker::PhantomData;
use std::path::Path;
use std::str::FromStr;

/// A single value or a list of values.
#[derive(Clone, Debug, PartialEq)]
pub struct OneOrMany<T>(pub Vec<T>);

impl<T> OneOrMany<T> {
    pub fn one(value: T) -> Self {
        Self(vec![value])
    }
}

impl<T: Serialize> Serialize for OneOrMany<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.as_slice() {
            [one] => one.serialize(s),
            many => many.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = OneOrMany<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a value or a list of values")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                T::deserialize(StrDeserializer::<E>::new(v)).map(OneOrMany::one)
            }

            fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                T::deserialize(MapAccessDeserializer::new(map)).map(OneOrMany::one)
            }

            fn visit_seq<A: de::SeqAccess<'de>>(self, seq: A) -> Result<Self::Value, A::Error> {
                Vec::<T>::deserialize(SeqAccessDeserializer::new(seq)).map(OneOrMany)
            }
        }

        d.deserialize_any(V(PhantomData))
    }
}

/// A built-in layout by name or an explicit spec.
#[derive(Clone, Debug, PartialEq)]
pub enum LayoutChoice {
    Builtin(String),
    Custom(LayoutSpec),
}

impl LayoutChoice {
    pub fn spec(&self) -> Result<LayoutSpec, ConfigError> {
        match self {
            LayoutChoice::Builtin(name) => LayoutSpec::builtin(name).ok_or_else(|| ConfigError::Invalid {
                key: "layout".into(),
                message: format!("unknown layout `{name}` (expected Small, Wide, Long, Large or an inline table)"),
            }),
            LayoutChoice::Custom(spec) => Ok(spec.clone()),
        }
    }
}

impl Serialize for LayoutChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LayoutChoice::Builtin(name) => s.serialize_str(name),
            LayoutChoice::Custom(spec) => spec.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LayoutChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;

        impl<'de> Visitor<'de> for V {
            type Value = LayoutChoice;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a layout name or a table with name, pick_stations, replenish_stations, aisles_horizontal, aisles_vertical and pods")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(LayoutChoice::Builtin(v.to_string()))
            }

            fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                LayoutSpec::deserialize(MapAccessDeserializer::new(map)).map(LayoutChoice::Custom)
            }
        }

        d.deserialize_any(V)
    }
}

/// A row of the result table: night policy for the down-period scenario,
/// or a robot split for the parallel one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setup {
    /// Stations pause at night, robots stay idle.
    Deactivated,
    /// Stations pause at night, robots run the active mechanism.
    Activated,
    Split(RobotSplit),
}

impl Setup {
    pub fn scenario(self) -> ScenarioKind {
        match self {
            Setup::Deactivated | Setup::Activated => ScenarioKind::DownPeriod,
            Setup::Split(_) => ScenarioKind::Parallel,
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setup::Deactivated => f.write_str("deactivated"),
            Setup::Activated => f.write_str("activated"),
            Setup::Split(s) => f.write_str(s.name()),
        }
    }
}

impl FromStr for Setup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "deactivated" => Ok(Setup::Deactivated),
            "activated" => Ok(Setup::Activated),
            _ => s.parse().map(Setup::Split).map_err(|_| {
                format!("unknown setup `{s}` (expected deactivated, activated, R1P3A0, R1P2A1 or R1P3A1)")
            }),
        }
    }
}

impl Serialize for Setup {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Setup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyParams {
    /// Share of the most prominent locations forming the cache.
    pub cache_fraction: f64,
    pub speed_weight: f64,
    pub utility_weight: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            cache_fraction: 0.25,
            speed_weight: 1.0,
            utility_weight: 1.0,
        }
    }
}

fn default_horizon() -> f64 {
    168.0
}

fn default_repetitions() -> usize {
    5
}

fn default_output_dir() -> String {
    "rmfs-out".into()
}

/// The experiment file as written by users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub layout: OneOrMany<LayoutChoice>,
    /// Optional; implied by the setups. When given, every setup must match it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    pub mechanism: OneOrMany<MechanismPair>,
    /// Defaults to `activated` for the down-period scenario and `R1P3A0` for
    /// the parallel one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<OneOrMany<Setup>>,
    #[serde(default = "default_horizon")]
    pub horizon_hours: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Worker threads, 0 for one per core.
    #[serde(default)]
    pub parallel: usize,
    #[serde(default)]
    pub policy: PolicyParams,
    #[serde(default)]
    pub kinematics: KinematicsConfig,
    #[serde(default)]
    pub simulation: SimParams,
}

impl ExperimentConfig {
    pub fn new(layout: LayoutChoice, mechanism: MechanismPair) -> Self {
        Self {
            layout: OneOrMany::one(layout),
            scenario: None,
            mechanism: OneOrMany::one(mechanism),
            setup: None,
            horizon_hours: default_horizon(),
            repetitions: default_repetitions(),
            base_seed: 0,
            output_dir: default_output_dir(),
            parallel: 0,
            policy: PolicyParams::default(),
            kinematics: KinematicsConfig::default(),
            simulation: SimParams::default(),
        }
    }

    fn setups(&self) -> Vec<Setup> {
        match (&self.setup, self.scenario) {
            (Some(s), _) => s.0.clone(),
            (None, Some(ScenarioKind::Parallel)) => vec![Setup::Split(RobotSplit::R1P3A0)],
            (None, _) => vec![Setup::Activated],
        }
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// `<layout>_<mechanism>_<setup>`, also the output subdirectory.
    pub id: String,
    pub layout: LayoutSpec,
    pub mechanism: MechanismPair,
    pub setup: Setup,
}

impl Cell {
    pub fn scenario(&self) -> ScenarioKind {
        self.setup.scenario()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
}

impl ExperimentPlan {
    pub fn from_config(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let invalid = |key: &str, message: String| ConfigError::Invalid {
            key: key.into(),
            message,
        };
        if config.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1".into()));
        }
        if !(config.horizon_hours.is_finite() && config.horizon_hours > 0.0) {
            return Err(invalid(
                "horizon_hours",
                format!("must be positive, got {}", config.horizon_hours),
            ));
        }
        if i64::try_from(config.base_seed).is_err() {
            return Err(invalid("base_seed", "must fit in a signed 64-bit integer".into()));
        }
        let p = &config.policy;
        if !(0.0..=1.0).contains(&p.cache_fraction) {
            return Err(invalid("policy.cache_fraction", "must lie in [0, 1]".into()));
        }
        if !weights(p).is_valid() {
            return Err(invalid(
                "policy",
                "speed_weight and utility_weight must be non-negative with a positive sum".into(),
            ));
        }
        config.kinematics.validate().map_err(|m| invalid("kinematics", m))?;
        config.simulation.validate().map_err(|m| invalid("simulation", m))?;

        let setups = config.setups();
        if let Some(kind) = config.scenario {
            if let Some(s) = setups.iter().find(|s| s.scenario() != kind) {
                return Err(invalid(
                    "setup",
                    format!("`{s}` belongs to the {} scenario, but scenario is {kind}", s.scenario()),
                ));
            }
        }
        let mut layouts = Vec::new();
        for choice in &config.layout.0 {
            let spec = choice.spec()?;
            crate::layout::generate_layout(&spec).map_err(|e| invalid("layout", e.to_string()))?;
            layouts.push(spec);
        }

        let mut cells = Vec::new();
        let mut ids = BTreeSet::new();
        for layout in &layouts {
            for &mechanism in &config.mechanism.0 {
                for &setup in &setups {
                    let id = format!("{}_{}_{}", layout.name, mechanism, setup);
                    if !ids.insert(id.clone()) {
                        return Err(invalid("layout", format!("cell `{id}` appears twice")));
                    }
                    cells.push(Cell {
                        id,
                        layout: layout.clone(),
                        mechanism,
                        setup,
                    });
                }
            }
        }
        Ok(Self { config, cells })
    }

    pub fn repetitions(&self) -> usize {
        self.config.repetitions
    }

    /// Seed of one run. It depends on the layout, the scenario, the
    /// repetition and the base seed only, so all mechanisms and setups of a
    /// layout see the same stock and order streams.
    pub fn run_seed(&self, cell: &Cell, repetition: usize) -> u64 {
        let layout = serde_json::to_string(&cell.layout).expect("layout specs serialize");
        let mut h = Sha256::new();
        h.update(layout.as_bytes());
        h.update(cell.scenario().to_string().as_bytes());
        h.update((repetition as u64).to_le_bytes());
        h.update(self.config.base_seed.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn scenario_config(&self, cell: &Cell, repetition: usize) -> ScenarioConfig {
        let c = &self.config;
        let mut pair = cell.mechanism;
        let split = match cell.setup {
            Setup::Deactivated => {
                pair.active = None;
                RobotSplit::R1P3A0
            }
            Setup::Activated => RobotSplit::R1P3A0,
            Setup::Split(s) => s,
        };
        let mut mechanism = MechanismConfig::new(pair);
        mechanism.cache_fraction = c.policy.cache_fraction;
        mechanism.weights = weights(&c.policy);
        let mut sc = ScenarioConfig::new(
            cell.scenario(),
            cell.layout.clone(),
            mechanism,
            self.run_seed(cell, repetition),
        );
        sc.horizon = c.horizon_hours * HOUR;
        sc.repetitions = c.repetitions;
        sc.robot_split = split;
        sc.kinematics = c.kinematics;
        sc.params = c.simulation;
        sc
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        self.config.to_toml()
    }
}

fn weights(p: &PolicyParams) -> ScoringWeights {
    ScoringWeights {
        speed: p.speed_weight,
        utility: p.utility_weight,
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentPlan, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    ExperimentPlan::from_config(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentPlan, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
