//! Cascade semantics: metapopulation specs and their layered progressive
//! form, live-edge sampling by forward simulation, and Monte Carlo
//! estimation of a strategy's expected reward.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Action, ActionId, Edge, Instance, NodeId, Strategy};
use crate::rng::{SeedKey, Stream};
use crate::scenario::Cascade;
use crate::stats::Estimate;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("patch {0} has no neighbours within r0 but a pair closer than r0 was requested")]
    NoNeighbours(usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("probability {value} out of range in {context}")]
    ProbabilityOutOfRange { value: f64, context: &'static str },
    #[error("parcels do not partition the patches: {0}")]
    BadPartition(String),
    #[error("{extinction} extinction probabilities for {patches} patches")]
    ExtinctionLength { extinction: usize, patches: usize },
    #[error("patch index {0} out of range")]
    PatchOutOfRange(usize),
    #[error("invalid kernel parameters: {0}")]
    BadKernel(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub x: f64,
    pub y: f64,
    pub initial_occupied: bool,
}

impl Patch {
    pub fn distance(&self, other: &Patch) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// A group of patches bought (or already conserved) together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parcel {
    pub patches: Vec<usize>,
    pub conserved: bool,
    pub cost: f64,
}

/// Colonization kernel: `1/C_i` within the foraging radius `r0`, an
/// exponential tail `alpha * exp(-gamma * d)` beyond it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Metres.
    pub r0: f64,
    pub alpha: f64,
    /// Per metre.
    pub gamma: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { r0: 3000.0, alpha: 0.1, gamma: 7.69e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Colonization {
    Kernel(KernelParams),
    /// `(i, j, p_ij)` triples; missing pairs have probability 0.
    Explicit { probs: Vec<(usize, usize, f64)> },
}

/// Non-progressive patch-occupancy model over a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetapopSpec {
    pub patches: Vec<Patch>,
    pub extinction: Vec<f64>,
    pub colonization: Colonization,
    pub horizon: usize,
    pub parcels: Vec<Parcel>,
}

impl MetapopSpec {
    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.patches.len();
        if self.horizon == 0 {
            return Err(ModelError::ZeroHorizon);
        }
        if self.extinction.len() != n {
            return Err(ModelError::ExtinctionLength { extinction: self.extinction.len(), patches: n });
        }
        for &b in &self.extinction {
            if !(0.0..=1.0).contains(&b) {
                return Err(ModelError::ProbabilityOutOfRange { value: b, context: "extinction" });
            }
        }
        match &self.colonization {
            Colonization::Kernel(k) => {
                if !(k.r0 >= 0.0 && k.alpha >= 0.0 && k.gamma >= 0.0) {
                    return Err(ModelError::BadKernel(format!("{k:?}")));
                }
            }
            Colonization::Explicit { probs } => {
                for &(i, j, p) in probs {
                    if i >= n || j >= n {
                        return Err(ModelError::PatchOutOfRange(i.max(j)));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ModelError::ProbabilityOutOfRange { value: p, context: "colonization" });
                    }
                }
            }
        }
        let mut owner = vec![None; n];
        for (l, parcel) in self.parcels.iter().enumerate() {
            if parcel.patches.is_empty() {
                return Err(ModelError::BadPartition(format!("parcel {l} is empty")));
            }
            for &i in &parcel.patches {
                let slot = owner.get_mut(i).ok_or(ModelError::PatchOutOfRange(i))?;
                if let Some(prev) = slot.replace(l) {
                    return Err(ModelError::BadPartition(format!("patch {i} in parcels {prev} and {l}")));
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(ModelError::BadPartition(format!("patch {i} belongs to no parcel")));
        }
        Ok(())
    }

    /// Parcel index of every patch.
    pub fn parcel_of(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.patches.len()];
        for (l, parcel) in self.parcels.iter().enumerate() {
            for &i in &parcel.patches {
                owner[i] = l;
            }
        }
        owner
    }

    /// Action id of each parcel in the layered instance; `None` when
    /// conserved.
    pub fn parcel_actions(&self) -> Vec<Option<ActionId>> {
        let mut next = 0u32;
        self.parcels
            .iter()
            .map(|p| {
                (!p.conserved).then(|| {
                    next += 1;
                    ActionId(next - 1)
                })
            })
            .collect()
    }

    /// All nonzero colonization probabilities `(i, j, p_ij)`, `i != j`.
    pub fn colonization_probs(&self) -> Result<Vec<(usize, usize, f64)>, ModelError> {
        match &self.colonization {
            Colonization::Explicit { probs } => {
                Ok(probs.iter().copied().filter(|&(i, j, p)| i != j && p > 0.0).collect())
            }
            Colonization::Kernel(kernel) => {
                let counts = neighbour_counts(&self.patches, kernel.r0);
                let mut out = Vec::new();
                for (i, pi) in self.patches.iter().enumerate() {
                    for (j, pj) in self.patches.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        let p = colonization_prob(pi.distance(pj), kernel, counts[i])?;
                        if p > 0.0 {
                            out.push((i, j, p));
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// `C_i`: number of other patches within `r0` of each patch.
pub fn neighbour_counts(patches: &[Patch], r0: f64) -> Vec<usize> {
    patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            patches
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != i && p.distance(q) <= r0)
                .count()
        })
        .collect()
}

/// One-step colonization probability between two distinct patches at
/// `distance` metres, where the source patch has `neighbour_count`
/// neighbours within `r0`. Clamped to `[0, 1]`.
pub fn colonization_prob(distance: f64, kernel: &KernelParams, neighbour_count: usize) -> Result<f64, ModelError> {
    let p = if distance <= kernel.r0 {
        if neighbour_count == 0 {
            return Err(ModelError::NoNeighbours(0));
        }
        1.0 / neighbour_count as f64
    } else {
        kernel.alpha * (-kernel.gamma * distance).exp()
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Index of `v_{i,t}` in the layered graph.
#[derive(Clone, Copy, Debug)]
pub struct LayeredIndex {
    pub patches: usize,
    pub horizon: usize,
}

impl LayeredIndex {
    #[inline]
    pub fn node(&self, patch: usize, t: usize) -> NodeId {
        NodeId((t * self.patches + patch) as u32)
    }

    #[inline]
    pub fn patch_and_time(&self, v: NodeId) -> (usize, usize) {
        (v.index() % self.patches, v.index() / self.patches)
    }

    pub fn num_nodes(&self) -> usize {
        self.patches * (self.horizon + 1)
    }
}

/// Time-expanded progressive instance for a metapopulation spec.
///
/// Node `v_{i,t}` has index `t * n + i`. Colonization edges connect layer
/// `t` to `t + 1`, survival is the self-edge with probability `1 - beta_i`,
/// sources are the initially occupied patches at `t = 0` and every patch at
/// the horizon carries reward 1. Each priced parcel becomes one action over
/// all its patches in all layers; conserved parcels are free. The budget is
/// left at 0.
pub fn layered_graph(spec: &MetapopSpec) -> Result<Instance, ModelError> {
    spec.validate()?;
    let n = spec.num_patches();
    let horizon = spec.horizon;
    let idx = LayeredIndex { patches: n, horizon };
    let colonization = spec.colonization_probs()?;

    let mut inst = Instance::empty(idx.num_nodes());
    inst.labels = (0..=horizon)
        .flat_map(|t| (0..n).map(move |i| format!("p{i}t{t}")))
        .collect();
    for t in 0..horizon {
        for i in 0..n {
            let survive = 1.0 - spec.extinction[i];
            if survive > 0.0 {
                inst.edges.push(Edge { src: idx.node(i, t), dst: idx.node(i, t + 1), prob: survive });
            }
        }
        for &(i, j, p) in &colonization {
            inst.edges.push(Edge { src: idx.node(i, t), dst: idx.node(j, t + 1), prob: p });
        }
    }
    for parcel in &spec.parcels {
        let nodes: Vec<NodeId> = (0..=horizon)
            .flat_map(|t| parcel.patches.iter().map(move |&i| idx.node(i, t)))
            .collect();
        if parcel.conserved {
            inst.base_nodes.extend(nodes);
        } else {
            inst.actions.push(Action { nodes, cost: parcel.cost });
        }
    }
    inst.base_nodes.sort_unstable();
    inst.sources = spec
        .patches
        .iter()
        .enumerate()
        .filter(|(_, p)| p.initial_occupied)
        .map(|(i, _)| idx.node(i, 0))
        .collect();
    for i in 0..n {
        inst.rewards[idx.node(i, horizon).index()] = 1.0;
    }
    Ok(inst)
}

/// Directly simulate the non-progressive occupancy process and return the
/// occupancy at the horizon. Patches in parcels that are neither conserved
/// nor purchased (`purchased_parcels[l]`) can never be occupied.
pub fn simulate_occupancy<R: Rng>(
    spec: &MetapopSpec,
    purchased_parcels: &[bool],
    rng: &mut R,
) -> Result<Vec<bool>, ModelError> {
    spec.validate()?;
    let n = spec.num_patches();
    let owner = spec.parcel_of();
    let usable: Vec<bool> = (0..n)
        .map(|i| {
            let l = owner[i];
            spec.parcels[l].conserved || purchased_parcels.get(l).copied().unwrap_or(false)
        })
        .collect();
    let mut incoming = vec![Vec::new(); n];
    for (i, j, p) in spec.colonization_probs()? {
        incoming[j].push((i, p));
    }
    let mut occupied: Vec<bool> = (0..n).map(|i| usable[i] && spec.patches[i].initial_occupied).collect();
    for _ in 0..spec.horizon {
        let mut next = vec![false; n];
        for j in 0..n {
            if !usable[j] {
                continue;
            }
            let mut on = occupied[j] && rng.gen::<f64>() >= spec.extinction[j];
            for &(i, p) in &incoming[j] {
                if occupied[i] && rng.gen::<f64>() < p {
                    on = true;
                }
            }
            next[j] = on;
        }
        occupied = next;
    }
    Ok(occupied)
}

/// One sampled live-edge scenario together with the seed that produced it.
/// `nodes[v]` is the instance node behind local node `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SampleRepr", try_from = "SampleRepr")]
pub struct CascadeSample {
    pub scenario: u64,
    pub seed: SeedKey,
    pub nodes: Vec<NodeId>,
    pub cascade: Cascade,
}

#[derive(Serialize, Deserialize)]
struct SampleRepr {
    scenario: u64,
    seed: SeedKey,
    nodes: Vec<u32>,
    cascade: Cascade,
}

impl From<CascadeSample> for SampleRepr {
    fn from(s: CascadeSample) -> Self {
        SampleRepr {
            scenario: s.scenario,
            seed: s.seed,
            nodes: s.nodes.iter().map(|v| v.0).collect(),
            cascade: s.cascade,
        }
    }
}

impl TryFrom<SampleRepr> for CascadeSample {
    type Error = String;

    fn try_from(r: SampleRepr) -> Result<Self, Self::Error> {
        if r.nodes.len() != r.cascade.num_nodes() {
            return Err(format!("{} node ids for {} cascade nodes", r.nodes.len(), r.cascade.num_nodes()));
        }
        Ok(CascadeSample {
            scenario: r.scenario,
            seed: r.seed,
            nodes: r.nodes.into_iter().map(NodeId).collect(),
            cascade: r.cascade,
        })
    }
}

/// Precomputed adjacency for repeated live-edge sampling of one instance.
///
/// Edge coins are keyed by the edge's position in source-sorted order, so
/// every edge of scenario `k` sees the same coin no matter which part of
/// the graph is explored or in which order.
pub struct CascadeSampler<'a> {
    instance: &'a Instance,
    offsets: Vec<u32>,
    dsts: Vec<u32>,
    probs: Vec<f64>,
    access: Vec<Vec<ActionId>>,
    usable: Vec<bool>,
}

impl<'a> CascadeSampler<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        let n = instance.num_nodes;
        let mut order: Vec<usize> = (0..instance.edges.len()).collect();
        order.sort_by_key(|&e| instance.edges[e].src);
        let mut offsets = vec![0u32; n + 1];
        for e in &instance.edges {
            offsets[e.src.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let dsts = order.iter().map(|&e| instance.edges[e].dst.0).collect();
        let probs = order.iter().map(|&e| instance.edges[e].prob).collect();
        let access = instance.node_actions();
        let base = instance.base_mask();
        let usable = (0..n).map(|v| base[v] || !access[v].is_empty()).collect();
        CascadeSampler { instance, offsets, dsts, probs, access, usable }
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    /// Forward-simulate one cascade with every action purchased, flipping
    /// each explored edge's coin once and keeping the live edges.
    pub fn sample(&self, seed: SeedKey) -> CascadeSample {
        let n = self.instance.num_nodes;
        let mut rng = seed.rng();
        let mut visited = vec![false; n];
        let mut queue: Vec<u32> = Vec::new();
        for s in &self.instance.sources {
            let s = s.index();
            if self.usable[s] && !visited[s] {
                visited[s] = true;
                queue.push(s as u32);
            }
        }
        let mut live = Vec::new();
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            let (lo, hi) = (self.offsets[u] as usize, self.offsets[u + 1] as usize);
            if lo == hi {
                continue;
            }
            rng.set_word_pos(2 * lo as u128);
            for e in lo..hi {
                let coin: f64 = rng.gen();
                let w = self.dsts[e] as usize;
                if !self.usable[w] || coin >= self.probs[e] {
                    continue;
                }
                live.push((u as u32, w as u32));
                if !visited[w] {
                    visited[w] = true;
                    queue.push(w as u32);
                }
            }
        }

        let mut local = vec![u32::MAX; n];
        let mut nodes = Vec::with_capacity(queue.len());
        for v in 0..n {
            if visited[v] {
                local[v] = nodes.len() as u32;
                nodes.push(NodeId(v as u32));
            }
        }
        let rewards = nodes.iter().map(|v| self.instance.rewards[v.index()]).collect();
        let access = nodes.iter().map(|v| self.access[v.index()].clone()).collect();
        let edges = live.into_iter().map(|(u, w)| (local[u as usize], local[w as usize])).collect();
        let sources = self
            .instance
            .sources
            .iter()
            .filter(|s| visited[s.index()])
            .map(|s| local[s.index()])
            .collect();
        let cascade = Cascade::new(rewards, access, edges, sources).expect("sampled cascade is well formed");
        CascadeSample { scenario: seed.scenario, seed, nodes, cascade }
    }

    /// Scenarios `first..first + count` of one stream, sampled in parallel
    /// and returned in scenario order.
    pub fn sample_range(&self, global: u64, stream: Stream, first: u64, count: usize) -> Vec<CascadeSample> {
        (0..count as u64)
            .into_par_iter()
            .map(|k| self.sample(SeedKey::new(global, stream, first + k)))
            .collect()
    }
}

/// Sample scenario `k` of the training stream.
pub fn sample_cascade(instance: &Instance, k: u64, rng_seed: u64) -> CascadeSample {
    CascadeSampler::new(instance).sample(SeedKey::new(rng_seed, Stream::Training, k))
}

/// Reward reachable in one sampled scenario under `y`.
pub fn evaluate_on_sample(sample: &CascadeSample, y: &Strategy) -> f64 {
    sample.cascade.evaluate(y)
}

/// Mean and standard error of `y`'s reward over `n` fresh scenarios of the
/// test stream.
pub fn estimate_objective(instance: &Instance, y: &Strategy, n: usize, rng_seed: u64) -> Estimate {
    let sampler = CascadeSampler::new(instance);
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|k| sampler.sample(SeedKey::new(rng_seed, Stream::Test, k)).cascade.evaluate(y))
        .collect();
    Estimate::from_values(&values)
}

/// Mean and standard error of `y` over an already-sampled pool.
pub fn estimate_on_pool(pool: &[CascadeSample], y: &Strategy) -> Estimate {
    let values: Vec<f64> = pool.par_iter().map(|s| s.cascade.evaluate(y)).collect();
    Estimate::from_values(&values)
}
