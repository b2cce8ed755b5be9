#![allow(dead_code)]

use cascade_core::cascade::{CascadeSample, CascadeSampler};
use cascade_core::generate::{random_network, RandomParams};
use cascade_core::graph::{Instance, Strategy};
use cascade_core::rng::Stream;

pub fn network(seed: u64, nodes: usize, actions: usize, acyclic: bool) -> Instance {
    random_network(&RandomParams {
        nodes,
        actions,
        degree: 2.5,
        base_fraction: 0.25,
        sources: 2,
        acyclic,
        max_cost: 3,
        seed,
    })
}

pub fn samples(instance: &Instance, seed: u64, n: usize) -> Vec<CascadeSample> {
    CascadeSampler::new(instance).sample_range(seed, Stream::Training, 0, n)
}

/// Best feasible average over `pool` by trying every strategy.
pub fn brute_force(instance: &Instance, pool: &[CascadeSample], budget: f64) -> (f64, Strategy) {
    let costs = instance.costs();
    let mut best = (f64::NEG_INFINITY, Strategy::none(costs.len()));
    for y in Strategy::enumerate(costs.len()) {
        if !y.is_feasible(&costs, budget) {
            continue;
        }
        let v = pool.iter().map(|s| s.cascade.evaluate(&y)).sum::<f64>() / pool.len() as f64;
        if v > best.0 {
            best = (v, y);
        }
    }
    best
}
