//! `cascade`: generate instances, sample and reduce cascades, solve with SAA
//! or greedy, and write the CSV tables behind budget and training-size
//! plots.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascade_core::cascade::{estimate_on_pool, layered_graph, CascadeSample, CascadeSampler, KernelParams, MetapopSpec};
use cascade_core::generate::{
    cheapest_corridor, distant_reservoir, dependency_gadget, spatial_metapop, CostModel, ReservoirParams, SpatialParams,
};
use cascade_core::graph::{validate, Instance, Strategy};
use cascade_core::greedy::{greedy_select, trace_csv, EvalMode, GreedyConfig, Variant};
use cascade_core::mip::{build_mip, export_standard, SolveStatus};
use cascade_core::preprocess::{reduce, ReduceStats, ReducedCascade};
use cascade_core::rng::Stream;
use cascade_core::saa::{budget_sweep, gap_csv, gap_vs_training_size, run_saa, sweep_csv, Method, SaaConfig};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cascade", version, about = "Budgeted network design for stochastic cascades")]
struct Cli {
    /// Global seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an instance.
    #[command(subcommand)]
    Gen(Gen),
    /// Sample training cascades.
    Sample(SampleArgs),
    /// Reduce sampled cascades.
    Preprocess(PreprocessArgs),
    /// Select a strategy.
    #[command(subcommand)]
    Solve(Solve),
    /// Estimate a strategy's value on test cascades.
    Evaluate(EvaluateArgs),
    /// Compare methods across budgets.
    Sweep(SweepArgs),
    /// SAA bounds across training sizes.
    Gapcurve(GapArgs),
}

#[derive(Subcommand)]
enum Gen {
    /// Two-step dependency gadget with `c` nodes behind the second step.
    Gadget {
        #[arg(long, default_value_t = 10)]
        c: usize,
        #[arg(long, default_value_t = 0.0)]
        budget: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random spatial metapopulation.
    Spatial(SpatialArgs),
    /// Spatial metapopulation with a free reservoir far from the sources.
    Reservoir {
        #[command(flatten)]
        spatial: SpatialArgs,
        /// Minimum reservoir distance from occupied patches (default 3 r0).
        #[arg(long)]
        separation: Option<f64>,
        /// Reservoir radius around its anchor parcel (default 2 r0).
        #[arg(long)]
        radius: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct SpatialArgs {
    #[arg(long, default_value_t = 100)]
    patches: usize,
    #[arg(long, default_value_t = 20)]
    parcels: usize,
    /// Metres.
    #[arg(long, default_value_t = 20_000.0)]
    width: f64,
    #[arg(long, default_value_t = 20_000.0)]
    height: f64,
    #[arg(long, default_value_t = 0.5)]
    occupancy: f64,
    #[arg(long, default_value_t = 0.1)]
    conserved: f64,
    #[arg(long, default_value_t = 0.29)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 3000.0)]
    r0: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 7.69e-4)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    cost_base: f64,
    #[arg(long, default_value_t = 0.2)]
    cost_noise: f64,
    /// Budget stored in the instance (reservoir default: cheapest corridor).
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    n: usize,
    /// First scenario index.
    #[arg(long, default_value_t = 0)]
    first: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    cascades: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Solve {
    Saa(SaaArgs),
    Greedy(GreedyArgs),
}

#[derive(Args)]
struct SaaArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Overrides the instance budget.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    n_valid: usize,
    #[arg(long, default_value_t = 500)]
    n_test: usize,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Write the first replication's model in MPS format.
    #[arg(long)]
    export_mps: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GreedyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "uc")]
    variant: Variant,
    #[arg(long, default_value = "reuse+pre")]
    mode: EvalMode,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    budget: Option<f64>,
    /// Trace CSV destination.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Fill the trace's wallclock column.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Strategy JSON, or any JSON object with a `strategy` field.
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long, default_value_t = 500)]
    n_test: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "saa,greedy-uc,greedy-cb")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    n_valid: usize,
    #[arg(long, default_value_t = 500)]
    n_test: usize,
    /// Greedy training cascades (default m * n).
    #[arg(long)]
    greedy_n: Option<usize>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20")]
    sizes: Vec<usize>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 500)]
    n_valid: usize,
    #[arg(long, default_value_t = 500)]
    n_test: usize,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Instance JSON plus the optional metapopulation block it was built from.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(flatten)]
    instance: Instance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metapop: Option<MetapopSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    seed: u64,
    stream: Stream,
    samples: Vec<CascadeSample>,
}

#[derive(Serialize)]
struct PreprocessFile {
    seed: u64,
    reduced: Vec<ReducedCascade>,
    stats: Vec<ReduceStats>,
}

enum Failure {
    Usage(String),
    Validation(serde_json::Value),
    NoIncumbent(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Runtime(_) => 1,
            Failure::Validation(_) => 2,
            Failure::NoIncumbent(_) => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Usage(m) => json!({"error": "usage", "message": m}),
            Failure::Validation(v) => json!({"error": "validation", "details": v}),
            Failure::NoIncumbent(m) => json!({"error": "no_incumbent", "message": m}),
            Failure::Runtime(m) => json!({"error": "runtime", "message": m}),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(runtime),
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    emit(out, &text)
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let file: InstanceFile =
        serde_json::from_str(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    check_instance(&file.instance)?;
    Ok(file.instance)
}

fn check_instance(instance: &Instance) -> Result<(), Failure> {
    let report = validate(instance);
    if report.is_ok() {
        Ok(())
    } else {
        let messages: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        Err(Failure::Validation(json!({"violations": report.violations, "messages": messages})))
    }
}

fn spatial_params(a: &SpatialArgs, seed: u64) -> SpatialParams {
    SpatialParams {
        n_patches: a.patches,
        n_parcels: a.parcels,
        width: a.width,
        height: a.height,
        occupancy_rate: a.occupancy,
        conserved_fraction: a.conserved,
        kernel: KernelParams { r0: a.r0, alpha: a.alpha, gamma: a.gamma },
        beta: a.beta,
        horizon: a.horizon,
        cost: CostModel { base: a.cost_base, noise: a.cost_noise },
        seed,
    }
}

fn write_metapop(spec: MetapopSpec, budget: f64, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let instance = layered_graph(&spec).map_err(usage)?.with_budget(budget);
    check_instance(&instance)?;
    emit_json(out, &InstanceFile { instance, metapop: Some(spec), seed: Some(seed) })
}

fn gen(cmd: Gen, seed: u64) -> Result<(), Failure> {
    match cmd {
        Gen::Gadget { c, budget, out } => {
            if c == 0 {
                return Err(usage("--c must be at least 1"));
            }
            let instance = dependency_gadget(c).with_budget(budget);
            emit_json(out.as_deref(), &InstanceFile { instance, metapop: None, seed: None })
        }
        Gen::Spatial(a) => {
            let spec = spatial_metapop(&spatial_params(&a, seed)).map_err(usage)?;
            write_metapop(spec, a.budget.unwrap_or(0.0), seed, a.out.as_deref())
        }
        Gen::Reservoir { spatial: a, separation, radius } => {
            let base = spatial_metapop(&spatial_params(&a, seed)).map_err(usage)?;
            let defaults = ReservoirParams::for_radius(a.r0, seed);
            let params = ReservoirParams {
                separation: separation.unwrap_or(defaults.separation),
                radius: radius.unwrap_or(defaults.radius),
                seed,
            };
            let spec = distant_reservoir(&base, &params).map_err(usage)?;
            let budget = match a.budget {
                Some(b) => b,
                None => cheapest_corridor(&spec).map(|(c, _)| c).unwrap_or(0.0),
            };
            write_metapop(spec, budget, seed, a.out.as_deref())
        }
    }
}

fn load_strategy(path: &Path, num_actions: usize) -> Result<Strategy, Failure> {
    let value: serde_json::Value =
        serde_json::from_str(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let inner = value.get("strategy").cloned().unwrap_or(value);
    let y: Strategy = serde_json::from_value(inner).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if y.num_actions() != num_actions {
        return Err(usage(format!("strategy has {} actions, instance has {num_actions}", y.num_actions())));
    }
    Ok(y)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(g) => gen(g, seed),
        Command::Sample(a) => {
            let instance = load_instance(&a.instance)?;
            let samples = CascadeSampler::new(&instance).sample_range(seed, Stream::Training, a.first, a.n);
            emit_json(a.out.as_deref(), &SampleFile { seed, stream: Stream::Training, samples })
        }
        Command::Preprocess(a) => {
            let file: SampleFile = serde_json::from_str(&read(&a.cascades)?)
                .map_err(|e| usage(format!("{}: {e}", a.cascades.display())))?;
            let (reduced, stats) = file.samples.iter().map(|s| reduce(&ReducedCascade::from(s))).unzip();
            emit_json(a.out.as_deref(), &PreprocessFile { seed: file.seed, reduced, stats })
        }
        Command::Solve(Solve::Saa(a)) => {
            let instance = load_instance(&a.instance)?;
            let cfg = SaaConfig {
                m: a.m,
                n: a.n,
                n_valid: a.n_valid,
                n_test: a.n_test,
                budget: a.budget.unwrap_or(instance.budget),
                seed,
                node_limit: a.node_limit,
            };
            if let Some(path) = &a.export_mps {
                let samples = CascadeSampler::new(&instance).sample_range(seed, Stream::Training, 0, cfg.n);
                let reduced: Vec<ReducedCascade> = samples.iter().map(|s| reduce(&ReducedCascade::from(s)).0).collect();
                let model = build_mip(&reduced, &instance.costs(), cfg.budget).map_err(usage)?;
                export_standard(&model, path).map_err(runtime)?;
            }
            let report = run_saa(&instance, &cfg).map_err(usage)?;
            emit_json(a.out.as_deref(), &report)?;
            if report.replications.iter().any(|r| r.status == SolveStatus::BoundOnly) {
                return Err(Failure::NoIncumbent("node limit reached before any incumbent was found".into()));
            }
            Ok(())
        }
        Command::Solve(Solve::Greedy(a)) => {
            let instance = load_instance(&a.instance)?;
            let cfg = GreedyConfig {
                variant: a.variant,
                mode: a.mode,
                n: a.n,
                budget: a.budget.unwrap_or(instance.budget),
                seed,
            };
            let (strategy, trace) = greedy_select(&instance, &cfg).map_err(usage)?;
            if let Some(path) = &a.trace {
                fs::write(path, trace_csv(&trace, seed, a.timings)).map_err(runtime)?;
            }
            emit_json(
                a.out.as_deref(),
                &json!({
                    "seed": seed,
                    "variant": cfg.variant,
                    "mode": cfg.mode.name(),
                    "budget": cfg.budget,
                    "cost": strategy.cost(&instance.costs()),
                    "training_value": trace.training_value,
                    "strategy": strategy,
                }),
            )
        }
        Command::Evaluate(a) => {
            let instance = load_instance(&a.instance)?;
            let y = load_strategy(&a.strategy, instance.num_actions())?;
            if a.n_test == 0 {
                return Err(usage("--n-test must be at least 1"));
            }
            let pool = CascadeSampler::new(&instance).sample_range(seed, Stream::Test, 0, a.n_test);
            let est = estimate_on_pool(&pool, &y);
            emit_json(
                a.out.as_deref(),
                &json!({"seed": seed, "n": est.n, "mean": est.mean, "stderr": est.stderr, "ci95": est.ci95()}),
            )
        }
        Command::Sweep(a) => {
            let instance = load_instance(&a.instance)?;
            let cfg = SaaConfig { m: a.m, n: a.n, n_valid: a.n_valid, n_test: a.n_test, budget: 0.0, seed, node_limit: a.node_limit };
            let methods: BTreeSet<Method> = a.methods.into_iter().collect();
            let rows = budget_sweep(&instance, &a.budgets, &cfg, &methods, a.greedy_n.unwrap_or(a.m * a.n))
                .map_err(usage)?;
            emit(a.out.as_deref(), &sweep_csv(&rows, seed))
        }
        Command::Gapcurve(a) => {
            let instance = load_instance(&a.instance)?;
            let cfg = SaaConfig {
                m: a.m,
                n: 1,
                n_valid: a.n_valid,
                n_test: a.n_test,
                budget: a.budget.unwrap_or(instance.budget),
                seed,
                node_limit: a.node_limit,
            };
            let rows = gap_vs_training_size(&instance, &a.sizes, &cfg).map_err(usage)?;
            emit(a.out.as_deref(), &gap_csv(&rows, seed))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let failure = Failure::Usage(e.kind().to_string());
            eprintln!("{}", failure.to_json());
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("{}", runtime(e).to_json());
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}
