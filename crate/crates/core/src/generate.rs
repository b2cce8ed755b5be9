//! Seeded instance builders: the two-step dependency gadget, synthetic
//! spatial metapopulations and the distant-reservoir relabelling.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{KernelParams, MetapopSpec, Colonization, Parcel, Patch};
use crate::graph::{Action, Edge, Instance, NodeId};
use crate::rng::{SeedKey, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("area must have positive width and height")]
    ZeroArea,
    #[error("need 1 <= parcels <= patches, got {parcels} parcels for {patches} patches")]
    ParcelCount { parcels: usize, patches: usize },
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no occupied patches to start from")]
    NoSources,
    #[error("no parcel lies farther than {0} m from every occupied patch")]
    NoDistantParcel(f64),
    #[error("no chain of parcels within r0 links the sources to the reservoir")]
    NoCorridor,
}

/// The gadget on which greedy is arbitrarily bad.
///
/// Node 0 is a free source. Four unit-cost actions: `a1` and `a2` own two
/// children of the source each, `a3` owns one child, and `a4` owns `c`
/// nodes hanging off `a3`'s node. Every edge has probability 1 and every
/// action-owned node has reward 1. The budget is 0.
pub fn dependency_gadget(c: usize) -> Instance {
    let mut inst = Instance::empty(6 + c);
    inst.labels = ["s", "a1.0", "a1.1", "a2.0", "a2.1", "a3.0"].iter().map(|s| s.to_string()).collect();
    inst.labels.extend((0..c).map(|i| format!("a4.{i}")));
    inst.base_nodes = vec![NodeId(0)];
    inst.sources = vec![NodeId(0)];
    for v in 1..=5 {
        inst.edges.push(Edge { src: NodeId(0), dst: NodeId(v), prob: 1.0 });
    }
    let a4: Vec<NodeId> = (6..6 + c as u32).map(NodeId).collect();
    for &v in &a4 {
        inst.edges.push(Edge { src: NodeId(5), dst: v, prob: 1.0 });
    }
    for v in 1..inst.num_nodes {
        inst.rewards[v] = 1.0;
    }
    inst.actions = vec![
        Action { nodes: vec![NodeId(1), NodeId(2)], cost: 1.0 },
        Action { nodes: vec![NodeId(3), NodeId(4)], cost: 1.0 },
        Action { nodes: vec![NodeId(5)], cost: 1.0 },
        Action { nodes: a4, cost: 1.0 },
    ];
    inst
}

/// `cost = base * patch_count * (1 + U[-noise, noise])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub base: f64,
    pub noise: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { base: 1.0, noise: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub n_patches: usize,
    pub n_parcels: usize,
    /// Metres.
    pub width: f64,
    pub height: f64,
    /// Fraction of conserved patches occupied at the start.
    pub occupancy_rate: f64,
    /// Fraction of parcels already conserved.
    pub conserved_fraction: f64,
    pub kernel: KernelParams,
    pub beta: f64,
    pub horizon: usize,
    pub cost: CostModel,
    pub seed: u64,
}

impl Default for SpatialParams {
    fn default() -> Self {
        SpatialParams {
            n_patches: 100,
            n_parcels: 20,
            width: 20_000.0,
            height: 20_000.0,
            occupancy_rate: 0.5,
            conserved_fraction: 0.1,
            kernel: KernelParams::default(),
            beta: 0.29,
            horizon: 10,
            cost: CostModel::default(),
            seed: 0,
        }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), GenError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(GenError::OutOfRange { name, value })
    }
}

/// Random patches in a rectangle, grouped into spatially contiguous parcels.
///
/// Parcels are formed by cutting the area into `ceil(sqrt(parcels))`
/// horizontal bands, walking the bands in serpentine order and chunking the
/// walk into `n_parcels` runs of near-equal length. Every parcel gets a
/// cost, conserved ones included (it is only used if the parcel is later
/// made purchasable).
pub fn spatial_metapop(params: &SpatialParams) -> Result<MetapopSpec, GenError> {
    let p = params;
    if !(p.width > 0.0 && p.height > 0.0) {
        return Err(GenError::ZeroArea);
    }
    if p.n_parcels == 0 || p.n_parcels > p.n_patches {
        return Err(GenError::ParcelCount { parcels: p.n_parcels, patches: p.n_patches });
    }
    check_unit("occupancy_rate", p.occupancy_rate)?;
    check_unit("conserved_fraction", p.conserved_fraction)?;
    check_unit("beta", p.beta)?;
    check_unit("cost noise", p.cost.noise)?;
    if p.horizon == 0 {
        return Err(GenError::OutOfRange { name: "horizon", value: 0.0 });
    }
    if !(p.cost.base >= 0.0) {
        return Err(GenError::OutOfRange { name: "cost base", value: p.cost.base });
    }
    if !(p.kernel.r0 >= 0.0 && p.kernel.alpha >= 0.0 && p.kernel.gamma >= 0.0) {
        return Err(GenError::OutOfRange { name: "kernel", value: p.kernel.r0.min(p.kernel.alpha).min(p.kernel.gamma) });
    }

    let mut rng = SeedKey::new(p.seed, Stream::Generator, 0).rng();
    let mut patches: Vec<Patch> = (0..p.n_patches)
        .map(|_| Patch { x: rng.gen::<f64>() * p.width, y: rng.gen::<f64>() * p.height, initial_occupied: false })
        .collect();

    let bands = (p.n_parcels as f64).sqrt().ceil() as usize;
    let band = |q: &Patch| ((q.y / p.height * bands as f64) as usize).min(bands - 1);
    let mut order: Vec<usize> = (0..p.n_patches).collect();
    order.sort_by(|&i, &j| {
        let (bi, bj) = (band(&patches[i]), band(&patches[j]));
        let flip = |b: usize, x: f64| if b % 2 == 0 { x } else { -x };
        bi.cmp(&bj)
            .then(flip(bi, patches[i].x).total_cmp(&flip(bj, patches[j].x)))
            .then(i.cmp(&j))
    });
    let mut parcels: Vec<Parcel> = Vec::with_capacity(p.n_parcels);
    for l in 0..p.n_parcels {
        let lo = l * p.n_patches / p.n_parcels;
        let hi = (l + 1) * p.n_patches / p.n_parcels;
        let mut members = order[lo..hi].to_vec();
        members.sort_unstable();
        let noise = 1.0 + p.cost.noise * (2.0 * rng.gen::<f64>() - 1.0);
        parcels.push(Parcel { cost: p.cost.base * members.len() as f64 * noise, patches: members, conserved: false });
    }

    let n_conserved = ((p.conserved_fraction * p.n_parcels as f64).round() as usize).max(1);
    let mut ids: Vec<usize> = (0..p.n_parcels).collect();
    ids.shuffle(&mut rng);
    let mut conserved: Vec<usize> = ids[..n_conserved].to_vec();
    conserved.sort_unstable();
    let mut any = false;
    for &l in &conserved {
        parcels[l].conserved = true;
        for &i in &parcels[l].patches {
            if rng.gen::<f64>() < p.occupancy_rate {
                patches[i].initial_occupied = true;
                any = true;
            }
        }
    }
    if !any && p.occupancy_rate > 0.0 {
        patches[parcels[conserved[0]].patches[0]].initial_occupied = true;
    }

    Ok(MetapopSpec {
        extinction: vec![p.beta; p.n_patches],
        colonization: Colonization::Kernel(p.kernel),
        horizon: p.horizon,
        patches,
        parcels,
    })
}

fn foraging_radius(spec: &MetapopSpec) -> f64 {
    match &spec.colonization {
        Colonization::Kernel(k) => k.r0,
        Colonization::Explicit { .. } => KernelParams::default().r0,
    }
}

fn parcel_distance(spec: &MetapopSpec, a: usize, b: usize) -> f64 {
    let mut best = f64::INFINITY;
    for &i in &spec.parcels[a].patches {
        for &j in &spec.parcels[b].patches {
            best = best.min(spec.patches[i].distance(&spec.patches[j]));
        }
    }
    best
}

fn source_parcels(spec: &MetapopSpec) -> Vec<bool> {
    spec.parcels
        .iter()
        .map(|p| p.patches.iter().any(|&i| spec.patches[i].initial_occupied))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    /// Minimum distance from every occupied patch to the reservoir, metres.
    pub separation: f64,
    /// Parcels within this distance of the anchor parcel join the reservoir.
    pub radius: f64,
    pub seed: u64,
}

impl ReservoirParams {
    /// Separation `3 r0` and radius `2 r0`.
    pub fn for_radius(r0: f64, seed: u64) -> Self {
        ReservoirParams { separation: 3.0 * r0, radius: 2.0 * r0, seed }
    }
}

/// Relabel conservation so that a block of free parcels lies far from every
/// source and can only be reached through purchasable parcels.
///
/// Parcels holding an occupied patch stay conserved; every other parcel
/// becomes purchasable at its cost, except the reservoir: the parcels
/// within `radius` of an anchor drawn from the farthest quarter of the
/// candidates (parcels with no occupied patch and more than `separation`
/// from every occupied patch). Patches, costs and the kernel are unchanged.
pub fn distant_reservoir(spec: &MetapopSpec, params: &ReservoirParams) -> Result<MetapopSpec, GenError> {
    let is_source = source_parcels(spec);
    if !is_source.iter().any(|&s| s) {
        return Err(GenError::NoSources);
    }
    let occupied: Vec<&Patch> = spec.patches.iter().filter(|p| p.initial_occupied).collect();
    let reach: Vec<f64> = spec
        .parcels
        .iter()
        .map(|parcel| {
            parcel
                .patches
                .iter()
                .flat_map(|&i| occupied.iter().map(move |q| spec.patches[i].distance(q)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut candidates: Vec<usize> =
        (0..spec.parcels.len()).filter(|&l| !is_source[l] && reach[l] > params.separation).collect();
    if candidates.is_empty() {
        return Err(GenError::NoDistantParcel(params.separation));
    }
    candidates.sort_by(|&a, &b| reach[b].total_cmp(&reach[a]).then(a.cmp(&b)));
    let far = candidates.len().div_ceil(4);
    let mut rng = SeedKey::new(params.seed, Stream::Generator, 1).rng();
    let anchor = candidates[rng.gen_range(0..far)];

    let mut out = spec.clone();
    for (l, parcel) in out.parcels.iter_mut().enumerate() {
        parcel.conserved = is_source[l];
    }
    for &l in &candidates {
        if parcel_distance(spec, anchor, l) <= params.radius {
            out.parcels[l].conserved = true;
        }
    }
    if cheapest_corridor(&out).is_none() {
        return Err(GenError::NoCorridor);
    }
    Ok(out)
}

/// Cheapest set of purchasable parcels that links a source parcel to a
/// conserved non-source parcel through parcels within `r0` of each other.
/// Returns the total cost and the parcels to buy, or `None` if no such
/// chain exists.
pub fn cheapest_corridor(spec: &MetapopSpec) -> Option<(f64, Vec<usize>)> {
    let r0 = foraging_radius(spec);
    let n = spec.parcels.len();
    let is_source = source_parcels(spec);
    let step = |l: usize| if spec.parcels[l].conserved { 0.0 } else { spec.parcels[l].cost };
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for l in (0..n).filter(|&l| is_source[l]) {
        dist[l] = 0.0;
        heap.push(Reverse((OrdF64(0.0), l)));
    }
    while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if spec.parcels[u].conserved && !is_source[u] {
            let mut path = Vec::new();
            let mut v = u;
            while v != usize::MAX {
                if !spec.parcels[v].conserved {
                    path.push(v);
                }
                v = prev[v];
            }
            path.reverse();
            return Some((d, path));
        }
        for v in 0..n {
            if v == u || parcel_distance(spec, u, v) > r0 {
                continue;
            }
            let nd = d + step(v);
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((OrdF64(nd), v)));
            }
        }
    }
    None
}

/// Shape of a random test network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub nodes: usize,
    pub actions: usize,
    /// Expected out-degree.
    pub degree: f64,
    /// Fraction of nodes that are free.
    pub base_fraction: f64,
    pub sources: usize,
    /// Only edges from lower to higher node index.
    pub acyclic: bool,
    /// Integer costs are drawn from `1..=max_cost`.
    pub max_cost: u32,
    pub seed: u64,
}

/// Random network with overlapping actions: every priced node belongs to
/// one or two actions, sources may be priced, probabilities are either 1 or
/// uniform on `(0, 1)`, rewards are small integers and the budget is about
/// half the total cost.
pub fn random_network(p: &RandomParams) -> Instance {
    let mut rng = SeedKey::new(p.seed, Stream::Generator, 2).rng();
    let n = p.nodes.max(1);
    let mut inst = Instance::empty(n);
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); p.actions];
    for v in 0..n {
        let id = NodeId(v as u32);
        if p.actions == 0 || rng.gen::<f64>() < p.base_fraction {
            inst.base_nodes.push(id);
        } else {
            let first = rng.gen_range(0..p.actions);
            members[first].push(id);
            if rng.gen::<f64>() < 0.3 {
                let second = rng.gen_range(0..p.actions);
                if second != first {
                    members[second].push(id);
                }
            }
        }
        inst.rewards[v] = rng.gen_range(0..4) as f64;
    }
    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(&mut rng);
    let mut sources: Vec<NodeId> = ids[..p.sources.clamp(1, n)].iter().map(|&v| NodeId(v)).collect();
    if p.acyclic {
        // sources first so that they can reach something
        sources = (0..p.sources.clamp(1, n) as u32).map(NodeId).collect();
    }
    sources.sort_unstable();
    inst.sources = sources;
    let edge_p = if n > 1 { (p.degree / (n - 1) as f64).min(1.0) } else { 0.0 };
    for u in 0..n {
        for v in 0..n {
            if u == v || (p.acyclic && v < u) || rng.gen::<f64>() >= edge_p {
                continue;
            }
            let prob = if rng.gen::<f64>() < 0.3 { 1.0 } else { rng.gen_range(0.05..1.0) };
            inst.edges.push(Edge { src: NodeId(u as u32), dst: NodeId(v as u32), prob });
        }
    }
    inst.actions = members
        .into_iter()
        .map(|nodes| Action { nodes, cost: rng.gen_range(1..=p.max_cost.max(1)) as f64 })
        .collect();
    inst.budget = (inst.total_cost() / 2.0).floor();
    inst
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::layered_graph;
    use crate::graph::validate;

    #[test]
    fn gadget_shape() {
        let inst = dependency_gadget(10);
        assert_eq!(inst.num_nodes, 1 + 2 + 2 + 1 + 10);
        assert_eq!(inst.num_actions(), 4);
        assert!(validate(&inst).is_ok());
    }

    #[test]
    fn spatial_is_deterministic_and_valid() {
        let p = SpatialParams { seed: 3, ..Default::default() };
        let a = spatial_metapop(&p).unwrap();
        let b = spatial_metapop(&p).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.parcels.len(), 20);
        assert!(a.validate().is_ok());
        assert!(a.patches.iter().any(|q| q.initial_occupied));
        let inst = layered_graph(&a).unwrap();
        assert!(validate(&inst).is_ok());
        assert_eq!(inst.num_actions(), 18);
    }

    #[test]
    fn single_conserved_parcel_has_no_actions() {
        let p = SpatialParams { n_patches: 10, n_parcels: 1, conserved_fraction: 1.0, ..Default::default() };
        let inst = layered_graph(&spatial_metapop(&p).unwrap()).unwrap();
        assert_eq!(inst.num_actions(), 0);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let zero = SpatialParams { width: 0.0, ..Default::default() };
        assert_eq!(spatial_metapop(&zero), Err(GenError::ZeroArea));
        let many = SpatialParams { n_parcels: 101, ..Default::default() };
        assert!(matches!(spatial_metapop(&many), Err(GenError::ParcelCount { .. })));
    }

    #[test]
    fn reservoir_on_line() {
        // source at 0, stepping stones every 2.5 km, reservoir from 10 km
        let xs = [0.0, 2500.0, 5000.0, 7500.0, 10000.0, 10500.0];
        let spec = MetapopSpec {
            patches: xs.iter().enumerate().map(|(i, &x)| Patch { x, y: 0.0, initial_occupied: i == 0 }).collect(),
            extinction: vec![0.29; 6],
            colonization: Colonization::Kernel(KernelParams::default()),
            horizon: 5,
            parcels: (0..6).map(|i| Parcel { patches: vec![i], conserved: i == 0, cost: 1.0 }).collect(),
        };
        let out = distant_reservoir(&spec, &ReservoirParams::for_radius(3000.0, 0)).unwrap();
        let conserved: Vec<bool> = out.parcels.iter().map(|p| p.conserved).collect();
        assert_eq!(conserved, [true, false, false, false, true, true]);
        assert_eq!(cheapest_corridor(&out), Some((3.0, vec![1, 2, 3])));
    }

    #[test]
    fn random_network_is_valid() {
        for seed in 0..20 {
            let p = RandomParams {
                nodes: 30,
                actions: 6,
                degree: 2.0,
                base_fraction: 0.2,
                sources: 2,
                acyclic: seed % 2 == 0,
                max_cost: 3,
                seed,
            };
            let inst = random_network(&p);
            assert!(validate(&inst).is_ok(), "{:?}", validate(&inst));
            assert_eq!(inst.num_actions(), 6);
            if p.acyclic {
                assert!(inst.edges.iter().all(|e| e.src < e.dst));
            }
        }
    }

    #[test]
    fn reservoir_needs_distance() {
        let spec = MetapopSpec {
            patches: vec![Patch { x: 0.0, y: 0.0, initial_occupied: true }, Patch { x: 100.0, y: 0.0, initial_occupied: false }],
            extinction: vec![0.29; 2],
            colonization: Colonization::Kernel(KernelParams::default()),
            horizon: 2,
            parcels: vec![
                Parcel { patches: vec![0], conserved: true, cost: 0.0 },
                Parcel { patches: vec![1], conserved: false, cost: 1.0 },
            ],
        };
        assert_eq!(
            distant_reservoir(&spec, &ReservoirParams::for_radius(3000.0, 0)),
            Err(GenError::NoDistantParcel(9000.0))
        );
    }
}
