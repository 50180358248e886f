use super::config::{RobotSplit, ScenarioKind};
use crate::scoring::ScoreBoard;
use crate::world::World;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time_s: f64,
    /// Orders completed during the trailing hour.
    pub orders_per_hour: f64,
    pub well_sortedness: f64,
    /// Mean time from pod pickup to pick-station arrival over trips that
    /// arrived during the trailing hour.
    pub mean_trip_time_to_pick: Option<f64>,
    pub fill_level: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub units_picked: u64,
    pub units_replenished: u64,
    pub orders_completed: u64,
    /// Pods moved by active repositioning.
    pub moves_executed: u64,
    pub pick_trips: u64,
    pub replenish_trips: u64,
    /// Metres driven by all robots.
    pub distance_traveled: f64,
    /// Units handled per station, indexed by station id.
    pub station_units: Vec<u64>,
}

/// Combined pod score per storage tile, `None` where the location is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub time_s: f64,
    pub rows: u32,
    pub cols: u32,
    /// Row-major, row 0 is the southmost tile row.
    pub cells: Vec<Option<f64>>,
}

impl HeatmapGrid {
    pub fn capture(world: &World, scores: &ScoreBoard, time_s: f64) -> Self {
        let (rows, cols) = world.storage_grid;
        let mut cells = vec![None; (rows * cols) as usize];
        for loc in &world.locations {
            if let Some(pod) = loc.occupant {
                cells[(loc.tile.row * cols + loc.tile.col) as usize] = Some(scores.combined(pod));
            }
        }
        Self {
            time_s,
            rows,
            cols,
            cells,
        }
    }

    pub fn get(&self, row: u32, col: u32) -> Option<f64> {
        self.cells[(row * self.cols + col) as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub layout: String,
    pub scenario: ScenarioKind,
    pub mechanism: String,
    pub robot_split: RobotSplit,
    pub seed: u64,
    pub horizon_s: f64,
    pub active_hours: f64,
    pub units_per_active_hour: f64,
    pub utrs: f64,
    pub samples: Vec<Sample>,
    pub totals: Totals,
    pub heatmaps: Vec<HeatmapGrid>,
    pub invariant_violations: usize,
    /// First few violation messages, for diagnosis.
    pub violation_examples: Vec<String>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run results serialize")
    }
}
