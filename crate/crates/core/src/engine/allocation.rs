//! Default task allocation rules: order-to-station assignment and pod
//! selection for pick and replenishment trips.

use crate::ids::{PodId, SkuId};
use crate::world::{Pod, World};
use std::collections::{BTreeMap, BTreeSet};

/// A stored pod nobody has promised to fetch and no robot is standing under.
pub fn pod_eligible(world: &World, pod: PodId) -> bool {
    let p = world.pod(pod);
    match p.stored_at() {
        Some(loc) => p.reserved_by.is_none() && world.location(loc).claim.is_none(),
        None => false,
    }
}

pub fn units_pickable(pod: &Pod, need: &BTreeMap<SkuId, u32>) -> u32 {
    need.iter().map(|(&sku, &n)| pod.count(sku).min(n)).sum()
}

/// Pods holding each SKU.
#[derive(Clone, Debug, Default)]
pub struct SkuIndex {
    pods: Vec<BTreeSet<PodId>>,
}

impl SkuIndex {
    pub fn new(world: &World) -> Self {
        let mut pods = vec![BTreeSet::new(); world.catalog.len()];
        for p in &world.pods {
            for &sku in p.inventory.keys() {
                pods[sku.index()].insert(p.id);
            }
        }
        Self { pods }
    }

    /// Call after the count of `sku` in `pod` changed.
    pub fn update(&mut self, world: &World, pod: PodId, sku: SkuId) {
        if world.pod(pod).count(sku) > 0 {
            self.pods[sku.index()].insert(pod);
        } else {
            self.pods[sku.index()].remove(&pod);
        }
    }

    pub fn holding(&self, sku: SkuId) -> &BTreeSet<PodId> {
        &self.pods[sku.index()]
    }
}

/// Eligible pod covering most of `need`, ties by travel time (`times`
/// indexed by node) and then id. Pods covering nothing are never chosen.
pub fn select_pick_pod(
    world: &World,
    index: &SkuIndex,
    need: &BTreeMap<SkuId, u32>,
    times: &[f64],
) -> Option<(PodId, u32)> {
    let mut candidates = BTreeSet::new();
    for &sku in need.keys() {
        candidates.extend(index.holding(sku).iter().copied());
    }
    let mut best: Option<(u32, f64, PodId)> = None;
    for pod in candidates {
        if !pod_eligible(world, pod) {
            continue;
        }
        let units = units_pickable(world.pod(pod), need);
        if units == 0 {
            continue;
        }
        let loc = world.pod(pod).stored_at().expect("eligible pods are stored");
        let t = times[world.location(loc).waypoint.index()];
        let better = match best {
            None => true,
            Some((bu, bt, _)) => units > bu || (units == bu && t < bt),
        };
        if better {
            best = Some((units, t, pod));
        }
    }
    best.map(|(u, _, p)| (p, u))
}

/// Eligible pod with the most free capacity, ties by travel time and id.
pub fn select_replenish_pod(world: &World, times: &[f64]) -> Option<PodId> {
    let mut best: Option<(u32, f64, PodId)> = None;
    for p in &world.pods {
        if p.free_capacity() == 0 || !pod_eligible(world, p.id) {
            continue;
        }
        let loc = p.stored_at().expect("eligible pods are stored");
        let t = times[world.location(loc).waypoint.index()];
        let better = match best {
            None => true,
            Some((bf, bt, _)) => p.free_capacity() > bf || (p.free_capacity() == bf && t < bt),
        };
        if better {
            best = Some((p.free_capacity(), t, p.id));
        }
    }
    best.map(|(_, _, p)| p)
}

/// Station with the fewest assigned orders below `capacity`. Ties go to the
/// first such station at or after `start`, wrapping around.
pub fn choose_station(loads: &[usize], capacity: usize, start: usize) -> Option<usize> {
    let n = loads.len();
    (0..n)
        .map(|k| (start + k) % n)
        .filter(|&s| loads[s] < capacity)
        .min_by_key(|&s| loads[s])
}
