mod common;

use cascade_core::graph::{ActionId, Strategy};
use cascade_core::preprocess::{commit_action, commit_scenario, implies_edges, reduce, reduce_scenario, ReducedCascade};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn reduce_preserves_every_strategy(seed in any::<u64>(), nodes in 2usize..30, actions in 0usize..7, acyclic in any::<bool>()) {
        let inst = common::network(seed, nodes, actions, acyclic);
        for s in common::samples(&inst, seed, 3) {
            let raw = ReducedCascade::from(&s);
            let (red, stats) = reduce(&raw);
            prop_assert!(red.num_nodes() <= raw.num_nodes());
            prop_assert_eq!(stats.output_nodes, red.num_nodes());
            for y in Strategy::enumerate(actions) {
                prop_assert_eq!(raw.cascade.evaluate(&y), red.cascade.evaluate(&y));
            }
            let (again, _) = reduce(&red);
            prop_assert_eq!(&again, &red);
            // provenance partitions the kept original nodes
            let mut seen: Vec<u32> = red.provenance.iter().flatten().map(|v| v.0).collect();
            let before = seen.len();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(before, seen.len());
        }
    }

    /// The provenance-free paths build the same scenarios.
    #[test]
    fn bare_paths_agree(seed in any::<u64>(), nodes in 2usize..30, actions in 1usize..6, acyclic in any::<bool>()) {
        let inst = common::network(seed, nodes, actions, acyclic);
        for s in common::samples(&inst, seed, 2) {
            let (red, _) = reduce(&ReducedCascade::from(&s));
            prop_assert_eq!(&reduce_scenario(&s.cascade), &red.cascade);
            for l in 0..actions as u32 {
                let (committed, _) = commit_action(&red, ActionId(l));
                prop_assert_eq!(&commit_scenario(&red.cascade, ActionId(l)), &committed.cascade);
            }
        }
    }

    #[test]
    fn commit_matches_purchase(seed in any::<u64>(), nodes in 2usize..25, actions in 1usize..6) {
        let inst = common::network(seed, nodes, actions, false);
        for s in common::samples(&inst, seed, 2) {
            let raw = ReducedCascade::from(&s);
            for l in 0..actions {
                let a = ActionId(l as u32);
                let (committed, _) = commit_action(&raw, a);
                for y in Strategy::enumerate(actions) {
                    prop_assert_eq!(committed.cascade.evaluate(&y), raw.cascade.evaluate(&y.with(a)));
                }
            }
        }
    }

    #[test]
    fn implications_hold_under_every_strategy(seed in any::<u64>(), nodes in 2usize..20, actions in 0usize..6) {
        let inst = common::network(seed, nodes, actions, false);
        for s in common::samples(&inst, seed, 2) {
            let implied = implies_edges(&s.cascade);
            for y in Strategy::enumerate(actions) {
                let reached = s.cascade.reached(&y);
                for &(u, v) in &implied {
                    prop_assert!(!reached[u as usize] || reached[v as usize], "{u} => {v} violated");
                }
            }
        }
    }

    #[test]
    fn objective_is_monotone(seed in any::<u64>(), nodes in 2usize..25, actions in 1usize..6) {
        let inst = common::network(seed, nodes, actions, false);
        for s in common::samples(&inst, seed, 2) {
            for y in Strategy::enumerate(actions) {
                let base = s.cascade.evaluate(&y);
                for l in 0..actions {
                    prop_assert!(s.cascade.evaluate(&y.with(ActionId(l as u32))) >= base);
                }
            }
        }
    }
}

#[test]
fn all_purchased_reaches_every_sampled_node() {
    for seed in 0..20 {
        let inst = common::network(seed, 30, 5, false);
        for s in common::samples(&inst, seed, 4) {
            let all = s.cascade.reached(&Strategy::all(5));
            assert!(all.iter().all(|&r| r));
        }
    }
}
