//! Greedy baselines: repeatedly buy the affordable action with the best
//! estimated marginal gain (uniform cost) or gain per unit cost
//! (cost-benefit).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{CascadeSample, CascadeSampler};
use crate::graph::{ActionId, Instance, Strategy};
use crate::preprocess::{commit_scenario, reduce_scenario};
use crate::rng::{SeedKey, Stream};
use crate::scenario::Cascade;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Rank by marginal gain.
    Uc,
    /// Rank by marginal gain per unit cost.
    Cb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// New cascades for every score.
    Fresh,
    /// One pool sampled up front.
    Reuse,
    /// The pool is reduced once before scoring.
    ReusePre,
    /// The pool is re-reduced after every committed action.
    ReusePreRepeat,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Uc => "uc",
            Variant::Cb => "cb",
        }
    }
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Fresh => "fresh",
            EvalMode::Reuse => "reuse",
            EvalMode::ReusePre => "reuse+pre",
            EvalMode::ReusePreRepeat => "reuse+pre+repeat",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uc" => Ok(Variant::Uc),
            "cb" => Ok(Variant::Cb),
            _ => Err(format!("unknown greedy variant '{s}' (expected uc or cb)")),
        }
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "+").as_str() {
            "fresh" => Ok(EvalMode::Fresh),
            "reuse" => Ok(EvalMode::Reuse),
            "reuse+pre" => Ok(EvalMode::ReusePre),
            "reuse+pre+repeat" => Ok(EvalMode::ReusePreRepeat),
            _ => Err(format!("unknown evaluation mode '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub variant: Variant,
    pub mode: EvalMode,
    /// Training cascades per estimate.
    pub n: usize,
    pub budget: f64,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GreedyError {
    #[error("the number of training cascades must be at least 1")]
    NoCascades,
    #[error("negative budget {0}")]
    NegativeBudget(f64),
}

/// One committed action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyRound {
    pub round: usize,
    pub action: ActionId,
    /// Gain (UC) or gain per cost (CB); infinite for free actions taken
    /// up front under CB.
    pub score: f64,
    /// Estimated increase of the objective.
    pub gain: f64,
    pub cumulative_cost: f64,
    pub wallclock_ms: f64,
    /// Scenario sizes the round was scored on.
    pub pool_nodes: usize,
    pub pool_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub variant: Variant,
    pub mode: EvalMode,
    pub rounds: Vec<GreedyRound>,
    /// Objective of the final strategy on the training pool. Fresh mode
    /// reports it on `n` pool-stream cascades sampled at the end.
    pub training_value: f64,
    pub sampling_ms: f64,
    /// Up-front pool reduction.
    pub prep_ms: f64,
}

impl GreedyTrace {
    /// Selection time excluding sampling: preprocessing plus every round.
    pub fn selection_ms(&self) -> f64 {
        self.prep_ms + self.rounds.iter().map(|r| r.wallclock_ms).sum::<f64>()
    }

    pub fn actions(&self) -> Vec<ActionId> {
        self.rounds.iter().map(|r| r.action).collect()
    }
}

/// Marginal gain of `action` over `current`, averaged over `pool`, and the
/// resulting score.
pub fn score_action(
    pool: &[Cascade],
    current: &Strategy,
    action: ActionId,
    costs: &[f64],
    variant: Variant,
) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let with = current.with(action);
    let gain: f64 = pool.iter().map(|c| c.evaluate(&with) - c.evaluate(current)).sum::<f64>() / pool.len() as f64;
    match variant {
        Variant::Uc => gain,
        Variant::Cb => gain / costs[action.index()],
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Scenario pool with per-action indices so that a score only re-evaluates
/// the scenarios the action touches.
struct Pool {
    cascades: Vec<Cascade>,
    /// Current reward of each scenario under the selected strategy.
    base: Vec<f64>,
    touching: Vec<Vec<usize>>,
}

impl Pool {
    fn new(cascades: Vec<Cascade>, num_actions: usize, y: &Strategy) -> Self {
        let mut touching = vec![Vec::new(); num_actions];
        for (k, c) in cascades.iter().enumerate() {
            for a in c.referenced_actions() {
                if let Some(list) = touching.get_mut(a.index()) {
                    list.push(k);
                }
            }
        }
        let base = cascades.par_iter().map(|c| c.evaluate(y)).collect();
        Pool { cascades, base, touching }
    }

    fn total_gain(&self, y: &Strategy, action: ActionId) -> f64 {
        let with = y.with(action);
        self.touching[action.index()]
            .iter()
            .map(|&k| self.cascades[k].evaluate(&with) - self.base[k])
            .sum()
    }

    /// `action` was just added to `y`; only the scenarios it touches change
    /// value.
    fn refresh(&mut self, y: &Strategy, action: ActionId) {
        let touched = &self.touching[action.index()];
        let values: Vec<f64> = touched.par_iter().map(|&k| self.cascades[k].evaluate(y)).collect();
        for (&k, v) in touched.iter().zip(values) {
            self.base[k] = v;
        }
    }

    /// Re-reduce the scenarios `action` touches with it bought. Values do
    /// not move, only the scenarios and the action index.
    fn commit(&mut self, action: ActionId) {
        let touched = std::mem::take(&mut self.touching[action.index()]);
        let committed: Vec<Cascade> = touched.par_iter().map(|&k| commit_scenario(&self.cascades[k], action)).collect();
        for (&k, c) in touched.iter().zip(committed) {
            self.cascades[k] = c;
        }
        for list in &mut self.touching {
            list.retain(|k| touched.binary_search(k).is_err());
        }
        for &k in &touched {
            for a in self.cascades[k].referenced_actions() {
                if let Some(list) = self.touching.get_mut(a.index()) {
                    let at = list.partition_point(|&j| j < k);
                    list.insert(at, k);
                }
            }
        }
    }

    fn size(&self) -> (usize, usize) {
        (
            self.cascades.iter().map(Cascade::num_nodes).sum(),
            self.cascades.iter().map(Cascade::num_edges).sum(),
        )
    }

    fn value(&self) -> f64 {
        self.base.iter().sum::<f64>() / self.cascades.len() as f64
    }
}

fn sample_pool(instance: &Instance, cfg: &GreedyConfig) -> Vec<CascadeSample> {
    CascadeSampler::new(instance).sample_range(cfg.seed, Stream::GreedyPool, 0, cfg.n)
}

fn reduce_pool(samples: &[CascadeSample]) -> Vec<Cascade> {
    samples.par_iter().map(|s| reduce_scenario(&s.cascade)).collect()
}

/// Greedy selection from the empty strategy.
///
/// Each round scores every affordable unselected action and buys the best
/// scorer (lowest id on ties); selection stops when nothing is affordable
/// or the best gain is not positive. Under CB every zero-cost action is
/// bought before the first round.
pub fn greedy_select(instance: &Instance, cfg: &GreedyConfig) -> Result<(Strategy, GreedyTrace), GreedyError> {
    if cfg.n == 0 {
        return Err(GreedyError::NoCascades);
    }
    if !(cfg.budget >= 0.0) {
        return Err(GreedyError::NegativeBudget(cfg.budget));
    }
    let costs = instance.costs();
    let num_actions = costs.len();
    let mut y = Strategy::none(num_actions);
    let mut spent = 0.0;
    let mut trace = GreedyTrace {
        variant: cfg.variant,
        mode: cfg.mode,
        rounds: Vec::new(),
        training_value: 0.0,
        sampling_ms: 0.0,
        prep_ms: 0.0,
    };

    let start = Instant::now();
    let samples = if cfg.mode == EvalMode::Fresh { Vec::new() } else { sample_pool(instance, cfg) };
    trace.sampling_ms = ms_since(start);

    let start = Instant::now();
    let mut pool = match cfg.mode {
        EvalMode::Fresh => None,
        EvalMode::Reuse => Some(Pool::new(samples.iter().map(|s| s.cascade.clone()).collect(), num_actions, &y)),
        _ => Some(Pool::new(reduce_pool(&samples), num_actions, &y)),
    };
    drop(samples);
    trace.prep_ms = ms_since(start);

    let sampler = CascadeSampler::new(instance);
    let n = cfg.n as f64;

    let commit = |pool: &mut Option<Pool>, y: &Strategy, a: ActionId| {
        if let Some(p) = pool.as_mut() {
            p.refresh(y, a);
            if cfg.mode == EvalMode::ReusePreRepeat {
                p.commit(a);
            }
        }
    };

    if cfg.variant == Variant::Cb {
        for l in 0..num_actions {
            if costs[l] == 0.0 {
                let start = Instant::now();
                let a = ActionId(l as u32);
                let (pool_nodes, pool_edges) = pool.as_ref().map(Pool::size).unwrap_or((0, 0));
                let gain = match &pool {
                    Some(p) => p.total_gain(&y, a) / n,
                    None => 0.0,
                };
                y.insert(a);
                commit(&mut pool, &y, a);
                trace.rounds.push(GreedyRound {
                    round: trace.rounds.len(),
                    action: a,
                    score: f64::INFINITY,
                    gain,
                    cumulative_cost: spent,
                    wallclock_ms: ms_since(start),
                    pool_nodes,
                    pool_edges,
                });
            }
        }
    }

    for round in 0.. {
        let start = Instant::now();
        let candidates: Vec<usize> = (0..num_actions)
            .filter(|&l| !y.bits()[l] && costs[l] <= cfg.budget - spent + 1e-9)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let (gains, pool_nodes, pool_edges): (Vec<f64>, usize, usize) = match &pool {
            Some(p) => {
                let gains = candidates.par_iter().map(|&l| p.total_gain(&y, ActionId(l as u32)) / n).collect();
                let (nodes, edges) = p.size();
                (gains, nodes, edges)
            }
            None => {
                let per: Vec<(f64, usize, usize)> = candidates
                    .par_iter()
                    .map(|&l| {
                        let first = ((round as u64 * num_actions as u64) + l as u64) * cfg.n as u64;
                        let with = y.with(ActionId(l as u32));
                        let (mut gain, mut nodes, mut edges) = (0.0, 0, 0);
                        for j in 0..cfg.n as u64 {
                            let c = sampler.sample(SeedKey::new(cfg.seed, Stream::GreedyFresh, first + j)).cascade;
                            gain += c.evaluate(&with) - c.evaluate(&y);
                            nodes += c.num_nodes();
                            edges += c.num_edges();
                        }
                        (gain / n, nodes, edges)
                    })
                    .collect();
                let nodes = per.iter().map(|p| p.1).sum();
                let edges = per.iter().map(|p| p.2).sum();
                (per.into_iter().map(|p| p.0).collect(), nodes, edges)
            }
        };

        let mut best: Option<(usize, f64, f64)> = None;
        for (&l, &gain) in candidates.iter().zip(&gains) {
            let score = match cfg.variant {
                Variant::Uc => gain,
                Variant::Cb => gain / costs[l],
            };
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((l, score, gain));
            }
        }
        let Some((l, score, gain)) = best else { break };
        if gain <= 0.0 {
            break;
        }
        let a = ActionId(l as u32);
        y.insert(a);
        spent += costs[l];
        commit(&mut pool, &y, a);
        trace.rounds.push(GreedyRound {
            round: trace.rounds.len(),
            action: a,
            score,
            gain,
            cumulative_cost: spent,
            wallclock_ms: ms_since(start),
            pool_nodes,
            pool_edges,
        });
    }

    trace.training_value = match &pool {
        Some(p) => p.value(),
        None => {
            let values: Vec<f64> = (0..cfg.n as u64)
                .into_par_iter()
                .map(|j| sampler.sample(SeedKey::new(cfg.seed, Stream::GreedyPool, j)).cascade.evaluate(&y))
                .collect();
            values.iter().sum::<f64>() / n
        }
    };
    Ok((y, trace))
}

/// Trace CSV with a versioned header comment. The wallclock column is left
/// empty unless `timings` is set so that outputs stay reproducible.
pub fn trace_csv(trace: &GreedyTrace, seed: u64, timings: bool) -> String {
    let mut out = format!("# greedy-trace v1 seed={seed}\n");
    out.push_str("round,action,variant,score,cumulative_cost,wallclock_ms,pool_nodes,pool_edges\n");
    for r in &trace.rounds {
        let wall = if timings { format!("{:.3}", r.wallclock_ms) } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.round, r.action, trace.variant, r.score, r.cumulative_cost, wall, r.pool_nodes, r.pool_edges
        ));
    }
    out
}
