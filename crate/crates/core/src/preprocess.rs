//! Objective-preserving compression of training cascades.
//!
//! Every operation here maps a scenario to a smaller one on which every
//! strategy collects exactly the same reward. Three passes are rotated until
//! nothing changes:
//!
//! * pruning drops nodes that are never reachable, or from which no reward
//!   can be reached;
//! * source collapsing merges everything reachable from free sources through
//!   free nodes into a single free source;
//! * the implication quotient merges nodes whose reachability is tied
//!   together under every strategy (mutual implication).
//!
//! Outputs are canonical: nodes are ordered by their smallest original node,
//! so equal reductions compare equal.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeSample;
use crate::graph::{ActionId, NodeId};
use crate::scenario::Cascade;

/// A compressed scenario. `provenance[v]` lists the original nodes folded
/// into local node `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCascade {
    pub cascade: Cascade,
    pub provenance: Vec<Vec<NodeId>>,
}

impl ReducedCascade {
    /// Wrap a raw scenario whose local node `v` stands for original node `v`.
    pub fn from_cascade(cascade: Cascade) -> Self {
        let provenance = (0..cascade.num_nodes() as u32).map(|v| vec![NodeId(v)]).collect();
        ReducedCascade { cascade, provenance }
    }

    pub fn num_nodes(&self) -> usize {
        self.cascade.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.cascade.num_edges()
    }
}

impl From<&CascadeSample> for ReducedCascade {
    fn from(sample: &CascadeSample) -> Self {
        ReducedCascade {
            cascade: sample.cascade.clone(),
            provenance: sample.nodes.iter().map(|&v| vec![v]).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Prune,
    CollapseSources,
    SccQuotient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub rotation: usize,
    pub stage: Stage,
    pub nodes: usize,
    pub edges: usize,
}

/// Compression statistics of one `reduce` call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReduceStats {
    pub input_nodes: usize,
    pub input_edges: usize,
    pub output_nodes: usize,
    pub output_edges: usize,
    pub rotations: usize,
    /// Merged components whose members share no purchasing action.
    pub unpurchasable_components: usize,
    pub stages: Vec<StageCount>,
}

impl ReduceStats {
    /// Counts right after the first pruning pass.
    pub fn after_first_prune(&self) -> Option<(usize, usize)> {
        self.stages.iter().find(|s| s.stage == Stage::Prune).map(|s| (s.nodes, s.edges))
    }
}

/// Intersection of two sorted action sets.
fn intersect(a: &[ActionId], b: &[ActionId]) -> Vec<ActionId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn is_subset(a: &[ActionId], b: &[ActionId]) -> bool {
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j == b.len() || b[j] != *x {
            return false;
        }
        j += 1;
    }
    true
}

/// A regrouped bare scenario.
struct Regrouped {
    cascade: Cascade,
    /// Smallest original node behind each new node.
    key: Vec<NodeId>,
    /// Old node to new node, `DROPPED` when it vanished.
    map: Vec<u32>,
    unpurchasable: usize,
}

const DROPPED: u32 = u32::MAX;

/// Rebuild `c` with old node `v` mapped to `group[v]` (`None` drops it).
///
/// A group's reward is the sum of its members', it is a source if any
/// member is, and it is usable exactly when all members are: free if every
/// member is free, otherwise purchasable by the intersection of the priced
/// members' action sets. Groups with an empty intersection can never be
/// reached and are dropped. Edges into sources are dropped since sources
/// are active iff usable regardless of them. New nodes are ordered by key.
fn regroup_core(c: &Cascade, key: &[NodeId], group: &[Option<u32>], num_groups: usize) -> Regrouped {
    let mut reward = vec![0.0; num_groups];
    let mut source = vec![false; num_groups];
    let mut gkey: Vec<Option<NodeId>> = vec![None; num_groups];
    // priced members per group, bucketed CSR-style
    let mut priced = vec![0u32; num_groups + 1];
    let is_source = c.source_mask();
    for v in 0..c.num_nodes() {
        let Some(g) = group[v] else { continue };
        let g = g as usize;
        reward[g] += c.rewards()[v];
        source[g] |= is_source[v];
        gkey[g] = Some(gkey[g].map_or(key[v], |k| k.min(key[v])));
        if !c.is_free(v as u32) {
            priced[g + 1] += 1;
        }
    }
    for g in 0..num_groups {
        priced[g + 1] += priced[g];
    }
    let mut fill = priced.clone();
    let mut members = vec![0u32; priced[num_groups] as usize];
    for v in 0..c.num_nodes() {
        if let Some(g) = group[v] {
            if !c.is_free(v as u32) {
                members[fill[g as usize] as usize] = v as u32;
                fill[g as usize] += 1;
            }
        }
    }
    // group action sets, in group order
    let mut set_offsets = vec![0u32; num_groups + 1];
    let mut sets: Vec<ActionId> = Vec::new();
    let mut unpurchasable = 0;
    let mut alive = vec![false; num_groups];
    for g in 0..num_groups {
        if gkey[g].is_some() {
            let mine = &members[priced[g] as usize..priced[g + 1] as usize];
            if let Some((&first, rest)) = mine.split_first() {
                let mut set = c.access(first).to_vec();
                for &v in rest {
                    set = intersect(&set, c.access(v));
                }
                if set.is_empty() {
                    unpurchasable += 1;
                } else {
                    alive[g] = true;
                }
                sets.extend_from_slice(&set);
            } else {
                alive[g] = true;
            }
        }
        set_offsets[g + 1] = sets.len() as u32;
    }
    let mut order: Vec<usize> = (0..num_groups).filter(|&g| alive[g]).collect();
    order.sort_unstable_by_key(|&g| gkey[g]);
    let mut rank = vec![DROPPED; num_groups];
    for (new, &g) in order.iter().enumerate() {
        rank[g] = new as u32;
    }

    let mut edges = Vec::with_capacity(c.num_edges());
    for (u, v) in c.edges() {
        let (Some(gu), Some(gv)) = (group[u as usize], group[v as usize]) else { continue };
        let (ru, rv) = (rank[gu as usize], rank[gv as usize]);
        if ru != rv && ru != DROPPED && rv != DROPPED && !source[gv as usize] {
            edges.push((ru, rv));
        }
    }
    let sources = order.iter().filter(|&&g| source[g]).map(|&g| rank[g]).collect();
    let mut access_offsets = Vec::with_capacity(order.len() + 1);
    access_offsets.push(0);
    let mut access_actions = Vec::with_capacity(sets.len());
    for &g in &order {
        access_actions.extend_from_slice(&sets[set_offsets[g] as usize..set_offsets[g + 1] as usize]);
        access_offsets.push(access_actions.len() as u32);
    }
    let cascade = Cascade::from_parts(
        order.iter().map(|&g| reward[g]).collect(),
        access_offsets,
        access_actions,
        edges,
        sources,
    );
    let map = group.iter().map(|g| g.map_or(DROPPED, |g| rank[g as usize])).collect();
    let key = order.iter().map(|&g| gkey[g].unwrap()).collect();
    Regrouped { cascade, key, map, unpurchasable }
}

/// True when `group` keeps every node in a group of its own, so that
/// regrouping a canonical scenario would return it unchanged.
fn is_identity(group: &[Option<u32>], num_groups: usize) -> bool {
    let mut seen = vec![false; num_groups];
    group.iter().all(|g| match g {
        Some(g) if !seen[*g as usize] => {
            seen[*g as usize] = true;
            true
        }
        _ => false,
    })
}

fn provenance_keys(rc: &ReducedCascade) -> Vec<NodeId> {
    rc.provenance.iter().map(|p| p.iter().copied().min().unwrap_or(NodeId(u32::MAX))).collect()
}

/// Fold `rc.provenance` along `owner` (input node to output node).
fn fold_provenance(rc: &ReducedCascade, owner: &[u32], num_nodes: usize) -> Vec<Vec<NodeId>> {
    let mut out = vec![Vec::new(); num_nodes];
    for (v, &o) in owner.iter().enumerate() {
        if o != DROPPED {
            out[o as usize].extend_from_slice(&rc.provenance[v]);
        }
    }
    for p in &mut out {
        p.sort_unstable();
    }
    out
}

fn regroup(rc: &ReducedCascade, group: &[Option<u32>], num_groups: usize) -> (ReducedCascade, usize) {
    let r = regroup_core(&rc.cascade, &provenance_keys(rc), group, num_groups);
    let provenance = fold_provenance(rc, &r.map, r.cascade.num_nodes());
    (ReducedCascade { cascade: r.cascade, provenance }, r.unpurchasable)
}

fn prune_groups(c: &Cascade) -> Vec<Option<u32>> {
    let n = c.num_nodes();
    let mut forward = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    for &s in c.sources() {
        if !forward[s as usize] {
            forward[s as usize] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for &w in c.successors(u) {
            if !forward[w as usize] {
                forward[w as usize] = true;
                stack.push(w);
            }
        }
    }
    // reverse adjacency in CSR form
    let mut offsets = vec![0usize; n + 1];
    for (_, v) in c.edges() {
        offsets[v as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut preds = vec![0u32; c.num_edges()];
    for (u, v) in c.edges() {
        preds[fill[v as usize]] = u;
        fill[v as usize] += 1;
    }
    let mut backward = vec![false; n];
    for v in 0..n {
        if forward[v] && c.rewards()[v] > 0.0 {
            backward[v] = true;
            stack.push(v as u32);
        }
    }
    while let Some(w) = stack.pop() {
        for &u in &preds[offsets[w as usize]..offsets[w as usize + 1]] {
            if forward[u as usize] && !backward[u as usize] {
                backward[u as usize] = true;
                stack.push(u);
            }
        }
    }
    backward.iter().enumerate().map(|(v, &k)| k.then_some(v as u32)).collect()
}

/// Remove nodes no strategy can reach, and nodes from which no positive
/// reward is reachable.
pub fn prune(rc: &ReducedCascade) -> ReducedCascade {
    let group = prune_groups(&rc.cascade);
    regroup(rc, &group, group.len()).0
}

/// Group 0 is the merged source; it is empty (and vanishes) when there
/// are no free sources.
fn collapse_groups(c: &Cascade) -> Vec<Option<u32>> {
    let n = c.num_nodes();
    let mut absorbed = vec![false; n];
    let mut stack: Vec<u32> = c.sources().iter().copied().filter(|&s| c.is_free(s)).collect();
    for &s in &stack {
        absorbed[s as usize] = true;
    }
    while let Some(u) = stack.pop() {
        for &w in c.successors(u) {
            if !absorbed[w as usize] && c.is_free(w) {
                absorbed[w as usize] = true;
                stack.push(w);
            }
        }
    }
    (0..n).map(|v| Some(if absorbed[v] { 0 } else { v as u32 + 1 })).collect()
}

/// Merge every node reachable from a free source through free nodes into
/// one free source carrying their total reward. Priced sources stay
/// separate: they are active only when purchased.
pub fn collapse_sources(rc: &ReducedCascade) -> ReducedCascade {
    let group = collapse_groups(&rc.cascade);
    regroup(rc, &group, group.len() + 1).0
}

/// Edges `u -> v` of the implication graph: reaching `u` under any strategy
/// forces reaching `v`.
///
/// * `(u, v)` is an edge and every strategy that makes `u` usable also makes
///   `v` usable (`v` free, or both priced with `A(u) ⊆ A(v)`);
/// * `(v, u)` is the only edge into the non-source `u`.
pub fn implies_edges(cascade: &Cascade) -> Vec<(u32, u32)> {
    let mut out = implied_unsorted(cascade);
    out.sort_unstable();
    out.dedup();
    out
}

fn implied_unsorted(cascade: &Cascade) -> Vec<(u32, u32)> {
    let n = cascade.num_nodes();
    let is_source = cascade.source_mask();
    let mut in_degree = vec![0u32; n];
    let mut parent = vec![0u32; n];
    let mut out = Vec::new();
    for (u, v) in cascade.edges() {
        in_degree[v as usize] += 1;
        parent[v as usize] = u;
        let forced = cascade.is_free(v) || (!cascade.is_free(u) && is_subset(cascade.access(u), cascade.access(v)));
        if forced {
            out.push((u, v));
        }
    }
    for u in 0..n {
        if in_degree[u] == 1 && !is_source[u] {
            out.push((u as u32, parent[u]));
        }
    }
    out
}

fn scc_groups(c: &Cascade) -> (Vec<Option<u32>>, usize) {
    let n = c.num_nodes();
    // duplicate edges are harmless here
    let mut graph: DiGraph<(), (), u32> = DiGraph::from_edges(implied_unsorted(c));
    while graph.node_count() < n {
        graph.add_node(());
    }
    let mut group = vec![None; n];
    let components = tarjan_scc(&graph);
    for (g, comp) in components.iter().enumerate() {
        for v in comp {
            group[v.index()] = Some(g as u32);
        }
    }
    (group, components.len())
}

/// Collapse every strongly connected component of the implication graph.
/// Returns the quotient and the number of components dropped because their
/// members share no purchasing action.
pub fn scc_quotient(rc: &ReducedCascade) -> (ReducedCascade, usize) {
    let (group, num_groups) = scc_groups(&rc.cascade);
    regroup(rc, &group, num_groups)
}

/// The fixpoint loop on a bare scenario. `key` orders the nodes; the
/// returned map sends input nodes to output nodes.
fn reduce_core(c: Cascade, key: Vec<NodeId>, canonical: bool, stats: &mut ReduceStats) -> (Cascade, Vec<u32>) {
    stats.input_nodes = c.num_nodes();
    stats.input_edges = c.num_edges();
    let mut owner: Vec<u32> = (0..c.num_nodes() as u32).collect();
    let mut current = c;
    let mut key = key;
    // until the first regroup the scenario may not be in canonical form
    let mut canonical = canonical;
    loop {
        stats.rotations += 1;
        let before = (current.num_nodes(), current.num_edges());
        for stage in [Stage::Prune, Stage::CollapseSources, Stage::SccQuotient] {
            let (group, num_groups) = match stage {
                Stage::Prune => {
                    let g = prune_groups(&current);
                    let n = g.len();
                    (g, n)
                }
                Stage::CollapseSources => {
                    let g = collapse_groups(&current);
                    let n = g.len() + 1;
                    (g, n)
                }
                Stage::SccQuotient => scc_groups(&current),
            };
            if !canonical || !is_identity(&group, num_groups) {
                let r = regroup_core(&current, &key, &group, num_groups);
                for o in &mut owner {
                    if *o != DROPPED {
                        *o = r.map[*o as usize];
                    }
                }
                stats.unpurchasable_components += r.unpurchasable;
                current = r.cascade;
                key = r.key;
                canonical = true;
            }
            stats.stages.push(StageCount {
                rotation: stats.rotations,
                stage,
                nodes: current.num_nodes(),
                edges: current.num_edges(),
            });
        }
        if (current.num_nodes(), current.num_edges()) == before {
            break;
        }
    }
    stats.output_nodes = current.num_nodes();
    stats.output_edges = current.num_edges();
    (current, owner)
}

/// Rotate prune, source collapsing and the implication quotient until a
/// whole rotation leaves the node and edge counts unchanged.
pub fn reduce(rc: &ReducedCascade) -> (ReducedCascade, ReduceStats) {
    let mut stats = ReduceStats::default();
    let (cascade, owner) = reduce_core(rc.cascade.clone(), provenance_keys(rc), false, &mut stats);
    let provenance = fold_provenance(rc, &owner, cascade.num_nodes());
    (ReducedCascade { cascade, provenance }, stats)
}

/// `reduce` without provenance; nodes keep their relative order.
pub fn reduce_scenario(c: &Cascade) -> Cascade {
    let key = (0..c.num_nodes() as u32).map(NodeId).collect();
    reduce_core(c.clone(), key, false, &mut ReduceStats::default()).0
}

/// Treat `action` as already bought: every node it purchases becomes free,
/// then the scenario is reduced again.
pub fn commit_action(rc: &ReducedCascade, action: ActionId) -> (ReducedCascade, ReduceStats) {
    let mut stats = ReduceStats::default();
    let (cascade, owner) = reduce_core(rc.cascade.free_action(action), provenance_keys(rc), false, &mut stats);
    let provenance = fold_provenance(rc, &owner, cascade.num_nodes());
    (ReducedCascade { cascade, provenance }, stats)
}

/// `commit_action` without provenance.
pub fn commit_scenario(c: &Cascade, action: ActionId) -> Cascade {
    let key = (0..c.num_nodes() as u32).map(NodeId).collect();
    // with positional keys the order is canonical already; only edges into
    // sources would still need a regroup
    let is_source = c.source_mask();
    let canonical = c.edges().all(|(_, v)| !is_source[v as usize]);
    reduce_core(c.free_action(action), key, canonical, &mut ReduceStats::default()).0
}
