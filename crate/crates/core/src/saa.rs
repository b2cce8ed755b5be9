//! Sample average approximation with validation-based candidate selection
//! and statistical bounds on the optimality gap.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{estimate_on_pool, CascadeSample, CascadeSampler};
use crate::graph::{Instance, Strategy};
use crate::greedy::{greedy_select, EvalMode, GreedyConfig, GreedyError, Variant};
use crate::mip::{build_mip, solve_exact, MipError, MipModel, SolveStatus};
use crate::preprocess::{reduce, ReducedCascade};
use crate::rng::Stream;
use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaConfig {
    /// Replications.
    pub m: usize,
    /// Training cascades per replication.
    pub n: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub budget: f64,
    pub seed: u64,
    /// Branch-and-bound node limit per replication; `None` solves to
    /// optimality.
    #[serde(default)]
    pub node_limit: Option<u64>,
}

impl SaaConfig {
    pub fn new(m: usize, n: usize, n_valid: usize, n_test: usize, budget: f64, seed: u64) -> Self {
        SaaConfig { m, n, n_valid, n_test, budget, seed, node_limit: None }
    }

    fn check(&self) -> Result<(), SaaError> {
        for (name, v) in [("m", self.m), ("n", self.n), ("n_valid", self.n_valid), ("n_test", self.n_test)] {
            if v == 0 {
                return Err(SaaError::ZeroCount(name));
            }
        }
        if !(self.budget >= 0.0) {
            return Err(SaaError::Mip(MipError::NegativeBudget(self.budget)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SaaError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Greedy(#[from] GreedyError),
    #[error("{0} list is empty")]
    Empty(&'static str),
}

/// One SAA replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub strategy: Strategy,
    /// Training objective of the incumbent.
    pub value: f64,
    /// Best bound proven by the solver; equals `value` when optimal.
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub nodes: u64,
    pub validation: Estimate,
    pub raw_nodes: usize,
    pub reduced_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaReport {
    pub config: SaaConfig,
    pub replications: Vec<Replication>,
    /// Mean of the replication upper bounds with its standard error over
    /// replications.
    pub upper: Estimate,
    /// Index of the replication whose candidate won validation.
    pub selected: usize,
    pub strategy: Strategy,
    /// Test-pool estimate of the selected strategy.
    pub lower: Estimate,
    pub gap: f64,
    pub upper_ci: f64,
    pub lower_ci: f64,
}

impl SaaReport {
    /// `sqrt(se_upper^2 + se_lower^2)`.
    pub fn combined_stderr(&self) -> f64 {
        self.upper.stderr.hypot(self.lower.stderr)
    }

    /// Gap relative to the upper bound (0 when the bound is 0).
    pub fn relative_gap(&self) -> f64 {
        if self.upper.mean.abs() > 0.0 {
            self.gap / self.upper.mean
        } else {
            0.0
        }
    }
}

/// Reduce the training cascades of replication `i` and solve its MIP.
pub fn solve_replication(
    sampler: &CascadeSampler,
    costs: &[f64],
    cfg: &SaaConfig,
    i: usize,
) -> Result<(crate::mip::SolveResult, MipModel, usize), SaaError> {
    let samples = sampler.sample_range(cfg.seed, Stream::Training, (i * cfg.n) as u64, cfg.n);
    let raw_nodes = samples.iter().map(|s| s.cascade.num_nodes()).sum();
    let reduced: Vec<ReducedCascade> = samples.iter().map(|s| reduce(&ReducedCascade::from(s)).0).collect();
    let model = build_mip(&reduced, costs, cfg.budget)?;
    let result = solve_exact(&model, cfg.node_limit)?;
    Ok((result, model, raw_nodes))
}

/// Run the replications and select and score a candidate using the given
/// validation and test pools.
pub fn run_saa_with_pools(
    instance: &Instance,
    cfg: &SaaConfig,
    validation: &[CascadeSample],
    test: &[CascadeSample],
) -> Result<SaaReport, SaaError> {
    cfg.check()?;
    let sampler = CascadeSampler::new(instance);
    let costs = instance.costs();
    let solved: Vec<_> = (0..cfg.m)
        .into_par_iter()
        .map(|i| solve_replication(&sampler, &costs, cfg, i))
        .collect::<Result<_, _>>()?;

    let replications: Vec<Replication> = solved
        .into_iter()
        .map(|(r, model, raw_nodes)| Replication {
            validation: estimate_on_pool(validation, &r.best_strategy),
            value: r.best_value,
            upper_bound: r.upper_bound,
            status: r.status,
            nodes: r.nodes,
            strategy: r.best_strategy,
            raw_nodes,
            reduced_nodes: model.scenarios().iter().map(|c| c.num_nodes()).sum(),
        })
        .collect();

    let mut selected = 0;
    for (i, r) in replications.iter().enumerate() {
        if r.validation.mean > replications[selected].validation.mean {
            selected = i;
        }
    }
    let strategy = replications[selected].strategy.clone();
    let lower = estimate_on_pool(test, &strategy);
    let uppers: Vec<f64> = replications.iter().map(|r| r.upper_bound).collect();
    let upper = Estimate::from_values(&uppers);
    Ok(SaaReport {
        config: cfg.clone(),
        gap: upper.mean - lower.mean,
        upper_ci: upper.ci95(),
        lower_ci: lower.ci95(),
        replications,
        upper,
        selected,
        strategy,
        lower,
    })
}

fn pools(instance: &Instance, cfg: &SaaConfig) -> (Vec<CascadeSample>, Vec<CascadeSample>) {
    let sampler = CascadeSampler::new(instance);
    (
        sampler.sample_range(cfg.seed, Stream::Validation, 0, cfg.n_valid),
        sampler.sample_range(cfg.seed, Stream::Test, 0, cfg.n_test),
    )
}

/// Solve `m` independent SAA problems of `n` training cascades, pick the
/// candidate with the best validation estimate (lowest replication on
/// ties) and estimate its value on the test pool.
pub fn run_saa(instance: &Instance, cfg: &SaaConfig) -> Result<SaaReport, SaaError> {
    cfg.check()?;
    let (validation, test) = pools(instance, cfg);
    run_saa_with_pools(instance, cfg, &validation, &test)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Saa,
    GreedyUc,
    GreedyCb,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Saa => "saa",
            Method::GreedyUc => "greedy-uc",
            Method::GreedyCb => "greedy-cb",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "saa" => Ok(Method::Saa),
            "greedy-uc" | "uc" => Ok(Method::GreedyUc),
            "greedy-cb" | "cb" => Ok(Method::GreedyCb),
            _ => Err(format!("unknown method '{s}' (expected saa, greedy-uc or greedy-cb)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: f64,
    pub method: Method,
    pub value: f64,
    pub stderr: f64,
    /// SAA upper bound at this budget, when SAA was run.
    pub saa_upper_bound: Option<f64>,
    pub strategy: Strategy,
}

/// Run every method at every budget and score all of them on one shared
/// test pool. Greedy methods use `greedy_n` reduced pool cascades.
pub fn budget_sweep(
    instance: &Instance,
    budgets: &[f64],
    cfg: &SaaConfig,
    methods: &BTreeSet<Method>,
    greedy_n: usize,
) -> Result<Vec<SweepRow>, SaaError> {
    if budgets.is_empty() {
        return Err(SaaError::Empty("budget"));
    }
    if methods.is_empty() {
        return Err(SaaError::Empty("method"));
    }
    cfg.check()?;
    let (validation, test) = pools(instance, cfg);
    let mut rows = Vec::new();
    for &budget in budgets {
        let cfg = SaaConfig { budget, ..cfg.clone() };
        let saa = if methods.contains(&Method::Saa) {
            Some(run_saa_with_pools(instance, &cfg, &validation, &test)?)
        } else {
            None
        };
        let upper = saa.as_ref().map(|r| r.upper.mean);
        for &method in methods {
            let strategy = match (method, &saa) {
                (Method::Saa, Some(report)) => report.strategy.clone(),
                (Method::Saa, None) => unreachable!("SAA report computed above"),
                (Method::GreedyUc | Method::GreedyCb, _) => {
                    let variant = if method == Method::GreedyUc { Variant::Uc } else { Variant::Cb };
                    let gcfg = GreedyConfig { variant, mode: EvalMode::ReusePre, n: greedy_n, budget, seed: cfg.seed };
                    greedy_select(instance, &gcfg)?.0
                }
            };
            let est = estimate_on_pool(&test, &strategy);
            rows.push(SweepRow { budget, method, value: est.mean, stderr: est.stderr, saa_upper_bound: upper, strategy });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub upper: f64,
    pub upper_ci: f64,
    pub lower: f64,
    pub lower_ci: f64,
    pub gap: f64,
    pub lower_stderr: f64,
    pub upper_stderr: f64,
}

impl GapRow {
    pub fn relative_gap(&self) -> f64 {
        if self.upper.abs() > 0.0 {
            self.gap / self.upper
        } else {
            0.0
        }
    }
}

/// Full SAA runs for each training size, sharing the validation and test
/// pools.
pub fn gap_vs_training_size(instance: &Instance, sizes: &[usize], cfg: &SaaConfig) -> Result<Vec<GapRow>, SaaError> {
    if sizes.is_empty() {
        return Err(SaaError::Empty("size"));
    }
    cfg.check()?;
    let (validation, test) = pools(instance, cfg);
    sizes
        .iter()
        .map(|&n| {
            let report = run_saa_with_pools(instance, &SaaConfig { n, ..cfg.clone() }, &validation, &test)?;
            Ok(GapRow {
                n,
                upper: report.upper.mean,
                upper_ci: report.upper_ci,
                lower: report.lower.mean,
                lower_ci: report.lower_ci,
                gap: report.gap,
                lower_stderr: report.lower.stderr,
                upper_stderr: report.upper.stderr,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow], seed: u64) -> String {
    let mut out = format!("# budget-sweep v1 seed={seed}\n");
    out.push_str("budget,method,value,stderr,saa_upper_bound\n");
    for r in rows {
        let upper = r.saa_upper_bound.map(|u| u.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.budget, r.method.name(), r.value, r.stderr, upper));
    }
    out
}

pub fn gap_csv(rows: &[GapRow], seed: u64) -> String {
    let mut out = format!("# training-size v1 seed={seed}\n");
    out.push_str("N,upper,upper_ci,lower,lower_ci,gap\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.n, r.upper, r.upper_ci, r.lower, r.lower_ci, r.gap));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::dependency_gadget;

    #[test]
    fn deterministic_instance_has_zero_gap() {
        let inst = dependency_gadget(10);
        let report = run_saa(&inst, &SaaConfig::new(2, 1, 3, 3, 2.0, 7)).unwrap();
        assert_eq!(report.upper.mean, 11.0);
        assert_eq!(report.lower.mean, 11.0);
        assert_eq!(report.gap, 0.0);
        assert_eq!(report.upper_ci, 0.0);
        assert_eq!(report.selected, 0);
    }

    #[test]
    fn default_protocol_shape_accepted() {
        let cfg = SaaConfig::new(50, 10, 500, 500, 2.0, 1);
        assert!(cfg.check().is_ok());
        assert!(SaaConfig::new(0, 10, 1, 1, 1.0, 1).check().is_err());
    }

    #[test]
    fn sweep_budget_zero_ties() {
        let inst = dependency_gadget(4);
        let methods: BTreeSet<Method> = [Method::Saa, Method::GreedyUc, Method::GreedyCb].into();
        let rows = budget_sweep(&inst, &[0.0, 4.0], &SaaConfig::new(1, 1, 2, 2, 0.0, 1), &methods, 2).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[..3].iter().all(|r| r.value == 0.0));
        // everything affordable
        assert!(rows[3..].iter().all(|r| r.value == 9.0));
        let csv = sweep_csv(&rows, 1);
        assert!(csv.starts_with("# budget-sweep v1 seed=1\nbudget,method,value,stderr,saa_upper_bound\n"));
    }

    #[test]
    fn gap_table_has_row_per_size() {
        let rows = gap_vs_training_size(&dependency_gadget(3), &[1, 2], &SaaConfig::new(1, 1, 2, 2, 2.0, 1)).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![1, 2]);
        assert!(gap_csv(&rows, 1).lines().nth(1) == Some("N,upper,upper_ci,lower,lower_ci,gap"));
    }
}
