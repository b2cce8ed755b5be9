//! The sample-average network-design MIP over a set of reduced scenarios,
//! its MPS export, and an exact branch-and-bound over the purchase
//! variables.
//!
//! Columns are the purchase variables `Y1..YL` followed by one reachability
//! variable `X<k>_<v>` per scenario `k` (1-based) and local node `v`
//! (0-based). Rows are the budget row, a purchase row `P<k>_<v>` for every
//! priced node and a flow row `F<k>_<v>` for every non-source node.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Strategy;
use crate::mps::{MpsColumn, MpsModel, MpsRow, RowSense};
use crate::preprocess::ReducedCascade;
use crate::scenario::Cascade;

/// Comparison tolerance for bounds and optimality.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MipError {
    #[error("scenario {scenario} is cyclic (node {node} lies on a cycle); only acyclic scenarios are supported")]
    CyclicScenario { scenario: usize, node: u32 },
    #[error("scenario {scenario} references action {action} but only {num_actions} actions exist")]
    UnknownAction { scenario: usize, action: usize, num_actions: usize },
    #[error("negative budget {0}")]
    NegativeBudget(f64),
    #[error("at least one scenario is required")]
    NoScenarios,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Budget,
    Purchase { scenario: usize, node: u32 },
    Flow { scenario: usize, node: u32 },
}

/// A `<=` row over column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct MipModel {
    costs: Vec<f64>,
    budget: f64,
    scenarios: Vec<Cascade>,
    x_offsets: Vec<usize>,
    rows: Vec<Row>,
}

impl MipModel {
    pub fn num_actions(&self) -> usize {
        self.costs.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn num_columns(&self) -> usize {
        self.x_offsets.last().copied().unwrap_or(self.costs.len())
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn scenarios(&self) -> &[Cascade] {
        &self.scenarios
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Column index of `x_v^k`.
    pub fn x_column(&self, scenario: usize, node: u32) -> usize {
        self.x_offsets[scenario] + node as usize
    }

    pub fn column_name(&self, col: usize) -> String {
        if col < self.num_actions() {
            return format!("Y{}", col + 1);
        }
        let k = self.x_offsets.partition_point(|&o| o <= col) - 1;
        format!("X{}_{}", k + 1, col - self.x_offsets[k])
    }

    pub fn row_name(&self, row: &Row) -> String {
        match row.kind {
            RowKind::Budget => "BUDGET".to_string(),
            RowKind::Purchase { scenario, node } => format!("P{}_{}", scenario + 1, node),
            RowKind::Flow { scenario, node } => format!("F{}_{}", scenario + 1, node),
        }
    }

    /// Objective coefficient `r_v^k / N` of a column (0 for purchases).
    pub fn objective(&self, col: usize) -> f64 {
        if col < self.num_actions() {
            return 0.0;
        }
        let k = self.x_offsets.partition_point(|&o| o <= col) - 1;
        self.scenarios[k].rewards()[col - self.x_offsets[k]] / self.num_scenarios() as f64
    }

    /// Objective of strategy `y` with the reachability variables at their
    /// optimum: a path of purchased nodes from a source lets every node on
    /// it sit at 1, and without one the flow rows force 0.
    pub fn evaluate(&self, y: &Strategy) -> f64 {
        self.scenario_total(y) / self.num_scenarios() as f64
    }

    fn scenario_total(&self, y: &Strategy) -> f64 {
        self.scenarios.iter().map(|c| c.evaluate(y)).sum()
    }

    pub fn to_mps(&self) -> MpsModel {
        let n_cols = self.num_columns();
        let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cols];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in &row.terms {
                entries[c].push((r, v));
            }
        }
        let columns = entries
            .into_iter()
            .enumerate()
            .map(|(c, entries)| MpsColumn {
                name: self.column_name(c),
                integer: c < self.num_actions(),
                lower: 0.0,
                upper: 1.0,
                objective: self.objective(c),
                entries,
            })
            .collect();
        MpsModel {
            name: "CASCADESAA".to_string(),
            maximize: true,
            objective_name: "OBJ".to_string(),
            rows: self
                .rows
                .iter()
                .map(|row| MpsRow { name: self.row_name(row), sense: RowSense::Le, rhs: row.rhs })
                .collect(),
            columns,
        }
    }
}

/// Assemble the model over reduced scenarios. Every scenario must be
/// acyclic.
pub fn build_mip(cascades: &[ReducedCascade], costs: &[f64], budget: f64) -> Result<MipModel, MipError> {
    build_mip_from(cascades.iter().map(|rc| rc.cascade.clone()).collect(), costs, budget)
}

pub fn build_mip_from(scenarios: Vec<Cascade>, costs: &[f64], budget: f64) -> Result<MipModel, MipError> {
    if scenarios.is_empty() {
        return Err(MipError::NoScenarios);
    }
    if !(budget >= 0.0) {
        return Err(MipError::NegativeBudget(budget));
    }
    let num_actions = costs.len();
    let mut x_offsets = Vec::with_capacity(scenarios.len() + 1);
    let mut next = num_actions;
    for (k, c) in scenarios.iter().enumerate() {
        if let Some(node) = c.cycle_witness() {
            return Err(MipError::CyclicScenario { scenario: k, node });
        }
        if let Some(a) = c.referenced_actions().into_iter().find(|a| a.index() >= num_actions) {
            return Err(MipError::UnknownAction { scenario: k, action: a.index(), num_actions });
        }
        x_offsets.push(next);
        next += c.num_nodes();
    }
    x_offsets.push(next);

    let mut rows = vec![Row {
        kind: RowKind::Budget,
        terms: costs.iter().enumerate().map(|(l, &c)| (l, c)).collect(),
        rhs: budget,
    }];
    for (k, c) in scenarios.iter().enumerate() {
        let x = |v: u32| x_offsets[k] + v as usize;
        for v in 0..c.num_nodes() as u32 {
            if c.is_free(v) {
                continue;
            }
            let mut terms = vec![(x(v), 1.0)];
            terms.extend(c.access(v).iter().map(|a| (a.index(), -1.0)));
            rows.push(Row { kind: RowKind::Purchase { scenario: k, node: v }, terms, rhs: 0.0 });
        }
        let is_source = c.source_mask();
        let preds = c.predecessors();
        for v in 0..c.num_nodes() as u32 {
            if is_source[v as usize] {
                continue;
            }
            let mut terms = vec![(x(v), 1.0)];
            terms.extend(preds[v as usize].iter().map(|&u| (x(u), -1.0)));
            rows.push(Row { kind: RowKind::Flow { scenario: k, node: v }, terms, rhs: 0.0 });
        }
    }
    Ok(MipModel { costs: costs.to_vec(), budget, scenarios, x_offsets, rows })
}

/// Optimal objective with the purchase variables fixed to `y`.
pub fn fix_y_evaluate(model: &MipModel, y: &Strategy) -> f64 {
    model.evaluate(y)
}

/// Write the model in MPS format.
pub fn export_standard(model: &MipModel, path: &Path) -> Result<(), MipError> {
    std::fs::write(path, crate::mps::write(&model.to_mps()))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The search tree was exhausted.
    Optimal,
    /// The node limit stopped the search before any node was expanded; the
    /// incumbent is the empty strategy.
    BoundOnly,
    /// The node limit stopped the search part way.
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best_strategy: Strategy,
    pub best_value: f64,
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub nodes: u64,
}

struct BbNode {
    include: Strategy,
    excluded: Vec<bool>,
    cost: f64,
    bound: f64,
}

struct Search<'m> {
    model: &'m MipModel,
}

impl Search<'_> {
    /// Undecided actions that still fit the remaining budget.
    fn candidates(&self, include: &Strategy, excluded: &[bool], cost: f64) -> Vec<usize> {
        let room = self.model.budget - cost + 1e-9;
        (0..self.model.num_actions())
            .filter(|&l| !include.bits()[l] && !excluded[l] && self.model.costs[l] <= room)
            .collect()
    }

    fn relaxation(&self, include: &Strategy, candidates: &[usize]) -> Strategy {
        let mut relax = include.clone();
        for &l in candidates {
            relax.insert(crate::graph::ActionId(l as u32));
        }
        relax
    }

    fn node(&self, include: Strategy, excluded: Vec<bool>, cost: f64) -> BbNode {
        let cands = self.candidates(&include, &excluded, cost);
        let bound = self.model.scenario_total(&self.relaxation(&include, &cands));
        BbNode { include, excluded, cost, bound }
    }
}

/// Exact maximisation over the purchase variables by depth-first
/// branch-and-bound.
///
/// The objective is monotone in `y`, so purchasing every undecided
/// affordable action bounds every completion of a node. Branching picks the
/// undecided action whose removal from that relaxation loses the most
/// (lowest index on ties); the child with the larger bound is explored
/// first. `node_limit = None` searches to completion.
pub fn solve_exact(model: &MipModel, node_limit: Option<u64>) -> Result<SolveResult, MipError> {
    if !(model.budget >= 0.0) {
        return Err(MipError::NegativeBudget(model.budget));
    }
    let n_scen = model.num_scenarios() as f64;
    let tol = TOLERANCE * n_scen;
    let search = Search { model };
    let num_actions = model.num_actions();

    let empty = Strategy::none(num_actions);
    let mut best_total = model.scenario_total(&empty);
    let mut best = empty.clone();
    let root = search.node(empty, vec![false; num_actions], 0.0);

    if node_limit == Some(0) {
        return Ok(SolveResult {
            best_strategy: best,
            best_value: best_total / n_scen,
            upper_bound: root.bound.max(best_total) / n_scen,
            status: SolveStatus::BoundOnly,
            nodes: 0,
        });
    }

    let mut stack = vec![root];
    let mut nodes = 0u64;
    while let Some(node) = stack.pop() {
        if node.bound <= best_total + tol {
            continue;
        }
        if node_limit.is_some_and(|limit| nodes >= limit) {
            stack.push(node);
            break;
        }
        nodes += 1;

        let value = model.scenario_total(&node.include);
        if value > best_total + tol {
            best_total = value;
            best = node.include.clone();
        }
        let cands = search.candidates(&node.include, &node.excluded, node.cost);
        let relax = search.relaxation(&node.include, &cands);
        let relax_cost = relax.cost(&model.costs);
        if cands.is_empty() || relax_cost <= model.budget + 1e-9 {
            // the relaxation itself is feasible
            if node.bound > best_total + tol {
                best_total = node.bound;
                best = relax;
            }
            continue;
        }

        let mut branch = cands[0];
        let mut branch_loss = f64::NEG_INFINITY;
        let mut exclude_bound = 0.0;
        for &l in &cands {
            let mut without = relax.clone();
            without.remove(crate::graph::ActionId(l as u32));
            let v = model.scenario_total(&without);
            let loss = node.bound - v;
            if loss > branch_loss {
                branch = l;
                branch_loss = loss;
                exclude_bound = v;
            }
        }

        let mut excluded = node.excluded.clone();
        excluded[branch] = true;
        let exclude = BbNode { include: node.include.clone(), excluded, cost: node.cost, bound: exclude_bound };
        let include = search.node(
            node.include.with(crate::graph::ActionId(branch as u32)),
            node.excluded,
            node.cost + model.costs[branch],
        );
        if exclude.bound > include.bound {
            stack.push(include);
            stack.push(exclude);
        } else {
            stack.push(exclude);
            stack.push(include);
        }
    }

    let open_bound = stack.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let status = if stack.iter().any(|n| n.bound > best_total + tol) {
        SolveStatus::NodeLimit
    } else {
        SolveStatus::Optimal
    };
    let upper_total = match status {
        SolveStatus::Optimal => best_total,
        _ => open_bound.max(best_total),
    };
    Ok(SolveResult {
        best_value: best_total / n_scen,
        upper_bound: upper_total / n_scen,
        best_strategy: best,
        status,
        nodes,
    })
}
