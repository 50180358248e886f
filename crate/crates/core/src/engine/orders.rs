//! Random SKU popularity, initial stock and order streams.

use super::config::SimParams;
use crate::error::WorldError;
use crate::ids::SkuId;
use crate::world::{OrderLine, SkuCatalog, World};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

/// Draws one Gamma weight per SKU and normalizes them into frequencies.
pub fn gamma_catalog<R: Rng>(rng: &mut R, skus: usize, shape: f64, scale: f64) -> SkuCatalog {
    let gamma = Gamma::new(shape, scale).expect("validated gamma parameters");
    let weights: Vec<f64> = (0..skus).map(|_| gamma.sample(rng)).collect();
    SkuCatalog::from_weights(&weights).expect("gamma weights are positive")
}

/// Samples SKUs proportionally to catalog frequency.
#[derive(Clone, Debug)]
pub struct SkuSampler {
    index: WeightedIndex<f64>,
}

impl SkuSampler {
    pub fn new(catalog: &SkuCatalog) -> Self {
        Self {
            index: WeightedIndex::new(catalog.frequencies()).expect("catalog has positive mass"),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SkuId {
        SkuId::from_index(self.index.sample(rng))
    }
}

/// Fills every pod to `initial_fill` of its capacity in chunks of SKUs drawn
/// by frequency.
pub fn stock_initial_inventory<R: Rng>(
    world: &mut World,
    sampler: &SkuSampler,
    rng: &mut R,
    params: &SimParams,
) -> Result<(), WorldError> {
    for pod in &mut world.pods {
        let target = (params.initial_fill * pod.capacity as f64).round() as u32;
        while pod.units() < target {
            let units = params.initial_chunk.min(target - pod.units());
            pod.add(sampler.sample(rng), units)?;
        }
    }
    world.initial_units = world.total_units();
    Ok(())
}

/// Deterministic source of customer and replenishment orders.
#[derive(Clone, Debug)]
pub struct OrderStream {
    sampler: SkuSampler,
    customer_rng: ChaCha8Rng,
    replenish_rng: ChaCha8Rng,
    lines_min: u32,
    lines_max: u32,
    replenish_size: u32,
}

impl OrderStream {
    pub fn new(sampler: SkuSampler, customer_seed: u64, replenish_seed: u64, params: &SimParams) -> Self {
        Self {
            sampler,
            customer_rng: ChaCha8Rng::seed_from_u64(customer_seed),
            replenish_rng: ChaCha8Rng::seed_from_u64(replenish_seed),
            lines_min: params.order_lines_min,
            lines_max: params.order_lines_max,
            replenish_size: params.replenishment_order_size,
        }
    }

    /// Lines of one customer order: distinct SKUs, one unit each.
    pub fn customer_lines(&mut self) -> Vec<OrderLine> {
        let n = self.customer_rng.random_range(self.lines_min..=self.lines_max) as usize;
        let mut skus: Vec<SkuId> = Vec::with_capacity(n);
        let mut attempts = 0;
        while skus.len() < n && attempts < 64 * n {
            let sku = self.sampler.sample(&mut self.customer_rng);
            if !skus.contains(&sku) {
                skus.push(sku);
            }
            attempts += 1;
        }
        skus.into_iter().map(|s| OrderLine::new(s, 1)).collect()
    }

    pub fn replenishment(&mut self) -> (SkuId, u32) {
        (self.sampler.sample(&mut self.replenish_rng), self.replenish_size)
    }
}
