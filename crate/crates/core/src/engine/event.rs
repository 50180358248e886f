use crate::ids::{RobotId, StationId};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// 06:00, stations resume.
    DayStart,
    /// 16:00, replenishment orders for the next day.
    Replenish,
    /// 22:00, stations stop.
    NightStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Robot reached the next node of its route. `token` invalidates stale events.
    RobotArrival {
        robot: RobotId,
        token: u64,
    },
    /// Robot finished turning, was woken up, or may retry a blocked move.
    RobotReady {
        robot: RobotId,
        token: u64,
    },
    StationUnitHandled {
        station: StationId,
    },
    PhaseChange(Phase),
    MetricSample,
    PolicyRefresh,
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.sequence.cmp(&self.sequence))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_sequence: u64,
    now: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Panics when `time` lies in the past.
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        assert!(
            time >= self.now,
            "event {kind:?} scheduled at {time} before current time {}",
            self.now
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event { time, sequence, kind });
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
