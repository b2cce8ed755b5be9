//! Live-edge samples against a direct activation-order simulation of the
//! same cascade.

mod common;

use std::collections::VecDeque;

use cascade_core::cascade::{estimate_objective, sample_cascade, CascadeSampler};
use cascade_core::graph::{purchased_nodes, Instance, Strategy};
use cascade_core::rng::{SeedKey, Stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Each newly active node tries each out-neighbour once, in activation
/// order; only purchased nodes can activate.
fn simulate(instance: &Instance, y: &Strategy, rng: &mut impl Rng) -> f64 {
    let usable = purchased_nodes(instance, y).unwrap();
    let mut active = vec![false; instance.num_nodes];
    let mut queue = VecDeque::new();
    for s in &instance.sources {
        if usable.contains(s) && !active[s.index()] {
            active[s.index()] = true;
            queue.push_back(*s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for e in instance.edges.iter().filter(|e| e.src == u) {
            if !active[e.dst.index()] && usable.contains(&e.dst) && rng.gen::<f64>() < e.prob {
                active[e.dst.index()] = true;
                queue.push_back(e.dst);
            }
        }
    }
    (0..instance.num_nodes).filter(|&v| active[v]).map(|v| instance.rewards[v]).sum()
}

#[test]
fn live_edge_mean_matches_activation_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..6u64 {
        let inst = common::network(seed, 25, 4, seed % 2 == 0);
        let y = Strategy::from_bits((0..4).map(|l| (seed >> l) & 1 == 1).collect());
        let runs = 4000;
        let sim: Vec<f64> = (0..runs).map(|_| simulate(&inst, &y, &mut rng)).collect();
        let sim_mean = sim.iter().sum::<f64>() / runs as f64;
        let sim_var = sim.iter().map(|v| (v - sim_mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let est = estimate_objective(&inst, &y, runs, seed);
        let se = (sim_var / runs as f64 + est.stderr.powi(2)).sqrt();
        assert!(
            (sim_mean - est.mean).abs() <= 4.0 * se + 1e-12,
            "seed {seed}: simulated {sim_mean} vs live-edge {} (se {se})",
            est.mean
        );
    }
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let inst = common::network(9, 60, 5, false);
    let sampler = CascadeSampler::new(&inst);
    let parallel = sampler.sample_range(4, Stream::Training, 10, 32);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| sampler.sample_range(4, Stream::Training, 10, 32));
    assert_eq!(parallel, serial);
    assert_eq!(parallel[3], sample_cascade(&inst, 13, 4));
    assert_eq!(parallel[0].seed, SeedKey::new(4, Stream::Training, 10));
}

#[test]
fn streams_are_disjoint() {
    let inst = common::network(2, 60, 5, false);
    let sampler = CascadeSampler::new(&inst);
    let a = sampler.sample(SeedKey::new(1, Stream::Training, 0));
    let b = sampler.sample(SeedKey::new(1, Stream::Test, 0));
    let c = sampler.sample(SeedKey::new(1, Stream::Validation, 0));
    assert!(a.cascade != b.cascade || a.cascade != c.cascade);
}
