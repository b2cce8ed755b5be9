//! The combinatorial value at fixed purchases checked against a plain
//! simplex solve of the exported model.

mod common;

use cascade_core::graph::Strategy;
use cascade_core::mip::{build_mip, fix_y_evaluate};
use cascade_core::mps::{self, MpsModel, RowSense};
use cascade_core::preprocess::{reduce, ReducedCascade};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// max c.x subject to A x <= b, x >= 0, with b >= 0 (the origin is
/// feasible). Dense tableau, Bland's rule.
fn simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -1e-12) else { break };
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > 1e-12 {
                let ratio = t[i][width - 1] / t[i][col];
                if ratio < best - 1e-12 || (ratio <= best + 1e-12 && row.is_some_and(|r: usize| basis[i] < basis[r])) {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let row = row.expect("bounded");
        let pivot = t[row][col];
        for v in t[row].iter_mut() {
            *v /= pivot;
        }
        for i in 0..=m {
            if i != row && t[i][col].abs() > 0.0 {
                let f = t[i][col];
                for j in 0..width {
                    t[i][j] -= f * t[row][j];
                }
            }
        }
        basis[row] = col;
    }
    t[m][width - 1]
}

/// LP optimum of the exported model with the integer columns fixed.
fn lp_value(model: &MpsModel, y: &Strategy) -> f64 {
    let fixed: Vec<Option<f64>> = model
        .columns
        .iter()
        .map(|col| col.integer.then(|| if y.bits()[col.name[1..].parse::<usize>().unwrap() - 1] { 1.0 } else { 0.0 }))
        .collect();
    let free: Vec<usize> = (0..model.columns.len()).filter(|&j| fixed[j].is_none()).collect();
    let mut a = vec![vec![0.0; free.len()]; model.rows.len()];
    let mut b: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
    for (k, &j) in free.iter().enumerate() {
        for &(r, v) in &model.columns[j].entries {
            a[r][k] = v;
        }
    }
    for (j, col) in model.columns.iter().enumerate() {
        if let Some(val) = fixed[j] {
            for &(r, v) in &col.entries {
                b[r] -= v * val;
            }
        }
    }
    assert!(model.rows.iter().all(|r| r.sense == RowSense::Le));
    // the budget row only involves fixed columns
    let keep: Vec<usize> = (0..a.len()).filter(|&r| a[r].iter().any(|&v| v != 0.0)).collect();
    let mut rows: Vec<Vec<f64>> = keep.iter().map(|&r| a[r].clone()).collect();
    let mut rhs: Vec<f64> = keep.iter().map(|&r| b[r]).collect();
    for (k, &j) in free.iter().enumerate() {
        let mut row = vec![0.0; free.len()];
        row[k] = 1.0;
        rows.push(row);
        rhs.push(model.columns[j].upper);
    }
    let c: Vec<f64> = free.iter().map(|&j| model.columns[j].objective).collect();
    simplex(&c, &rows, &rhs)
}

#[test]
fn simplex_solves_a_textbook_lp() {
    // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36
    let v = simplex(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0]);
    assert!((v - 36.0).abs() < 1e-9);
}

#[test]
fn lp_on_exported_model_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30u64 {
        let actions = 1 + trial as usize % 6;
        let inst = common::network(500 + trial, 20, actions, true);
        let pool = common::samples(&inst, trial, 3);
        let scenarios: Vec<ReducedCascade> = if trial % 2 == 0 {
            pool.iter().map(ReducedCascade::from).collect()
        } else {
            pool.iter().map(|s| reduce(&ReducedCascade::from(s)).0).collect()
        };
        let model = build_mip(&scenarios, &inst.costs(), inst.budget).unwrap();
        let exported = mps::parse(&mps::write(&model.to_mps())).unwrap();
        for _ in 0..10 {
            let y = Strategy::from_bits((0..actions).map(|_| rng.gen::<bool>()).collect());
            let lp = lp_value(&exported, &y);
            let comb = fix_y_evaluate(&model, &y);
            assert!((lp - comb).abs() < 1e-7, "trial {trial}: lp {lp} vs {comb}");
        }
    }
}
