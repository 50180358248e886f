use crate::ids::{LocationId, NodeId, PodId, RobotId, SkuId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("layout `{name}`: {field} must be at least 1")]
    ZeroCount { name: String, field: &'static str },
    #[error("layout `{name}` requests {pods} pods but only {locations} storage locations exist")]
    TooManyPods {
        name: String,
        pods: usize,
        locations: usize,
    },
    #[error("layout `{name}`: {stations} stations do not fit along a side of height {height} (need 3 rows each)")]
    StationsDoNotFit {
        name: String,
        stations: usize,
        height: usize,
    },
    #[error("layout `{name}` is not strongly connected: {detail}")]
    NotConnected { name: String, detail: String },
    #[error("unknown built-in layout `{0}` (expected one of Small, Wide, Long, Large)")]
    UnknownLayout(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge {from} -> {to} is not axis-aligned")]
    NotAxisAligned { from: NodeId, to: NodeId },
    #[error("edge {from} -> {to} has zero length")]
    ZeroLength { from: NodeId, to: NodeId },
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("unknown sku {0}")]
    UnknownSku(SkuId),
    #[error("sku frequencies sum to {0}, expected 1")]
    FrequenciesNotNormalized(f64),
    #[error("sku frequency {0} is outside [0, 1]")]
    FrequencyOutOfRange(f64),
    #[error("pod {pod} would hold {units} units, capacity is {capacity}")]
    OverCapacity { pod: PodId, units: u32, capacity: u32 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("every pod is empty; combined scores are undefined")]
    AllPodsEmpty,
    #[error("prominence requires at least one pick station")]
    NoPickStations,
    #[error("storage location {0} cannot reach any pick station")]
    Unreachable(LocationId),
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no unoccupied storage location is available")]
    NoFreeLocation,
    #[error("mechanism `{0}`: {1}")]
    InvalidMechanism(String, String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("deadlock at t={time:.0}s: no robot moved for {stalled:.0}s while {waiting} robots wait ({detail})")]
    Deadlock {
        time: f64,
        stalled: f64,
        waiting: usize,
        detail: String,
    },
    #[error("collision: robot {robot} arrived at {node} owned by {owner:?}")]
    Collision {
        robot: RobotId,
        node: NodeId,
        owner: Option<RobotId>,
    },
    #[error("no route from {from} to {to}")]
    NoRoute { from: NodeId, to: NodeId },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Serialize(String),
}
