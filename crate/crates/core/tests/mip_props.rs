mod common;

use std::collections::HashSet;

use cascade_core::generate::dependency_gadget;
use cascade_core::graph::{reward_under, Strategy};
use cascade_core::mip::{build_mip, fix_y_evaluate, solve_exact, SolveStatus};
use cascade_core::mps;
use cascade_core::preprocess::{reduce, ReducedCascade};
use proptest::prelude::*;

fn reduced(pool: &[cascade_core::CascadeSample]) -> Vec<ReducedCascade> {
    pool.iter().map(|s| reduce(&ReducedCascade::from(s)).0).collect()
}

#[test]
fn gadget_optimum_is_c_plus_one() {
    for c in [4, 10, 100] {
        let inst = dependency_gadget(c);
        let pool = common::samples(&inst, 0, 1);
        let model = build_mip(&reduced(&pool), &inst.costs(), 2.0).unwrap();
        let r = solve_exact(&model, None).unwrap();
        assert_eq!(r.best_value, c as f64 + 1.0);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.best_strategy.actions().map(|a| a.0).collect::<Vec<_>>(), vec![2, 3]);
    }
}

#[test]
fn all_ones_collects_everything() {
    let inst = common::network(5, 40, 6, true);
    let pool = common::samples(&inst, 5, 4);
    let model = build_mip(&reduced(&pool), &inst.costs(), inst.budget).unwrap();
    let total: f64 = pool.iter().map(|s| s.cascade.total_reward()).sum::<f64>() / 4.0;
    assert_eq!(fix_y_evaluate(&model, &Strategy::all(6)), total);
}

#[test]
fn twelve_action_instances_match_enumeration() {
    for trial in 0..50u64 {
        let inst = common::network(1000 + trial, 60, 12, true);
        let pool = common::samples(&inst, trial, 3);
        let model = build_mip(&reduced(&pool), &inst.costs(), inst.budget).unwrap();
        let r = solve_exact(&model, None).unwrap();
        let (best, _) = common::brute_force(&inst, &pool, inst.budget);
        assert!((r.best_value - best).abs() <= 1e-9, "trial {trial}: {} vs {best}", r.best_value);
        assert!(r.best_strategy.is_feasible(&inst.costs(), inst.budget));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 60, ..ProptestConfig::default() })]

    #[test]
    fn solve_matches_enumeration(seed in any::<u64>(), nodes in 3usize..40, actions in 0usize..9, n in 1usize..4, frac in 0.0f64..1.0) {
        let inst = common::network(seed, nodes, actions, true);
        let pool = common::samples(&inst, seed, n);
        let budget = (inst.total_cost() * frac).floor();
        let model = build_mip(&reduced(&pool), &inst.costs(), budget).unwrap();
        let r = solve_exact(&model, None).unwrap();
        let (best, _) = common::brute_force(&inst, &pool, budget);
        prop_assert!((r.best_value - best).abs() <= 1e-9);
        prop_assert!(r.best_value <= r.upper_bound + 1e-6);
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert_eq!(fix_y_evaluate(&model, &r.best_strategy), r.best_value);
    }

    #[test]
    fn node_limit_brackets_the_optimum(seed in any::<u64>(), limit in 0u64..6) {
        let inst = common::network(seed, 40, 8, true);
        let pool = common::samples(&inst, seed, 3);
        let model = build_mip(&reduced(&pool), &inst.costs(), inst.budget).unwrap();
        let r = solve_exact(&model, Some(limit)).unwrap();
        let (best, _) = common::brute_force(&inst, &pool, inst.budget);
        prop_assert!(r.best_value <= best + 1e-9);
        prop_assert!(r.upper_bound >= best - 1e-9);
        prop_assert!(r.best_strategy.is_feasible(&inst.costs(), inst.budget));
        if limit == 0 {
            prop_assert_eq!(r.status, SolveStatus::BoundOnly);
        }
        if r.status == SolveStatus::Optimal {
            prop_assert!((r.best_value - best).abs() <= 1e-9);
        }
    }

    /// The model's value at fixed y equals reachability over the live edges
    /// of the original instance.
    #[test]
    fn fixed_y_value_is_reachable_reward(seed in any::<u64>(), nodes in 3usize..30, actions in 1usize..6) {
        let inst = common::network(seed, nodes, actions, true);
        let pool = common::samples(&inst, seed, 3);
        let raw: Vec<ReducedCascade> = pool.iter().map(ReducedCascade::from).collect();
        let model = build_mip(&raw, &inst.costs(), inst.budget).unwrap();
        for y in Strategy::enumerate(actions) {
            let mut total = 0.0;
            for s in &pool {
                let live: HashSet<(u32, u32)> =
                    s.cascade.edges().map(|(u, v)| (s.nodes[u as usize].0, s.nodes[v as usize].0)).collect();
                total += reward_under(&inst, &y, |e| live.contains(&(inst.edges[e].src.0, inst.edges[e].dst.0))).unwrap();
            }
            prop_assert_eq!(fix_y_evaluate(&model, &y), total / 3.0);
        }
    }

    #[test]
    fn mps_round_trip(seed in any::<u64>(), nodes in 3usize..25, actions in 0usize..5) {
        let inst = common::network(seed, nodes, actions, true);
        let pool = common::samples(&inst, seed, 2);
        let model = build_mip(&reduced(&pool), &inst.costs(), inst.budget).unwrap();
        let written = model.to_mps();
        let parsed = mps::parse(&mps::write(&written)).unwrap();
        prop_assert_eq!(parsed, written);
    }
}
