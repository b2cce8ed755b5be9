//! A deterministic scenario graph: the live edges of one sampled cascade,
//! possibly compressed, with per-node rewards and per-node action sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ActionId, Strategy};

#[derive(Debug, Error, PartialEq)]
pub enum CascadeError {
    #[error("{rewards} rewards but {access} action sets")]
    LengthMismatch { rewards: usize, access: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(u32),
}

/// Scenario graph in compressed-sparse-row form.
///
/// Nodes are local indices `0..num_nodes`. An empty action set marks a free
/// node; otherwise the node is usable only when one of its actions is
/// purchased. Sources are active exactly when usable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CascadeRepr", try_from = "CascadeRepr")]
pub struct Cascade {
    rewards: Vec<f64>,
    /// Action sets in CSR form, each sorted.
    access_offsets: Vec<u32>,
    access_actions: Vec<ActionId>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    sources: Vec<u32>,
}

impl Cascade {
    /// Builds the graph. Edges are sorted and deduplicated, self-loops are
    /// dropped, action sets are sorted.
    pub fn new(
        rewards: Vec<f64>,
        mut access: Vec<Vec<ActionId>>,
        edges: Vec<(u32, u32)>,
        sources: Vec<u32>,
    ) -> Result<Self, CascadeError> {
        let n = rewards.len();
        if access.len() != n {
            return Err(CascadeError::LengthMismatch { rewards: n, access: access.len() });
        }
        for &(u, v) in &edges {
            for x in [u, v] {
                if x as usize >= n {
                    return Err(CascadeError::NodeOutOfRange(x));
                }
            }
        }
        if let Some(&s) = sources.iter().find(|&&s| s as usize >= n) {
            return Err(CascadeError::NodeOutOfRange(s));
        }
        let mut access_offsets = Vec::with_capacity(n + 1);
        access_offsets.push(0);
        let mut access_actions = Vec::new();
        for set in &mut access {
            set.sort_unstable();
            set.dedup();
            access_actions.extend_from_slice(set);
            access_offsets.push(access_actions.len() as u32);
        }
        Ok(Cascade::from_parts(rewards, access_offsets, access_actions, edges, sources))
    }

    /// Trusted constructor: indices in range, each action set sorted and
    /// deduplicated. Edges and sources are normalised here.
    pub(crate) fn from_parts(
        rewards: Vec<f64>,
        access_offsets: Vec<u32>,
        access_actions: Vec<ActionId>,
        edges: Vec<(u32, u32)>,
        mut sources: Vec<u32>,
    ) -> Self {
        let n = rewards.len();
        debug_assert_eq!(access_offsets.len(), n + 1);
        sources.sort_unstable();
        sources.dedup();

        // bucket by tail, then sort and dedup each bucket
        let mut start = vec![0u32; n + 1];
        for &(u, v) in &edges {
            if u != v {
                start[u as usize + 1] += 1;
            }
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut bucketed = vec![0u32; start[n] as usize];
        for (u, v) in edges {
            if u != v {
                bucketed[fill[u as usize] as usize] = v;
                fill[u as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0u32);
        let mut targets = Vec::with_capacity(bucketed.len());
        for u in 0..n {
            let bucket = &mut bucketed[start[u] as usize..start[u + 1] as usize];
            bucket.sort_unstable();
            let mut last = None;
            for &v in bucket.iter() {
                if last != Some(v) {
                    targets.push(v);
                    last = Some(v);
                }
            }
            offsets.push(targets.len() as u32);
        }
        Cascade { rewards, access_offsets, access_actions, offsets, targets, sources }
    }

    /// The same scenario with every node purchasable by `action` made free.
    pub fn free_action(&self, action: ActionId) -> Cascade {
        let mut access_offsets = Vec::with_capacity(self.num_nodes() + 1);
        access_offsets.push(0);
        let mut access_actions = Vec::with_capacity(self.access_actions.len());
        for v in 0..self.num_nodes() as u32 {
            let set = self.access(v);
            if set.binary_search(&action).is_err() {
                access_actions.extend_from_slice(set);
            }
            access_offsets.push(access_actions.len() as u32);
        }
        Cascade {
            rewards: self.rewards.clone(),
            access_offsets,
            access_actions,
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            sources: self.sources.clone(),
        }
    }

    pub fn empty() -> Self {
        Cascade::new(Vec::new(), Vec::new(), Vec::new(), Vec::new()).expect("empty cascade")
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.rewards.len()
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn successors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_nodes() as u32).flat_map(move |u| self.successors(u).iter().map(move |&v| (u, v)))
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    #[inline]
    pub fn access(&self, v: u32) -> &[ActionId] {
        let v = v as usize;
        &self.access_actions[self.access_offsets[v] as usize..self.access_offsets[v + 1] as usize]
    }

    #[inline]
    pub fn is_free(&self, v: u32) -> bool {
        let v = v as usize;
        self.access_offsets[v] == self.access_offsets[v + 1]
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn source_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_nodes()];
        for &s in &self.sources {
            mask[s as usize] = true;
        }
        mask
    }

    pub fn in_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.num_nodes()];
        for &v in &self.targets {
            deg[v as usize] += 1;
        }
        deg
    }

    /// Predecessor lists, one per node.
    pub fn predecessors(&self) -> Vec<Vec<u32>> {
        let mut preds = vec![Vec::new(); self.num_nodes()];
        for (u, v) in self.edges() {
            preds[v as usize].push(u);
        }
        preds
    }

    /// Every action mentioned by some node.
    pub fn referenced_actions(&self) -> Vec<ActionId> {
        let mut all: Vec<ActionId> = self.access_actions.clone();
        all.sort_unstable();
        all.dedup();
        all
    }

    #[inline]
    pub fn is_purchased(&self, v: u32, y: &Strategy) -> bool {
        let set = self.access(v);
        set.is_empty() || set.iter().any(|&a| y.contains(a))
    }

    /// Mask of nodes reachable from the sources through purchased nodes.
    pub fn reached(&self, y: &Strategy) -> Vec<bool> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        for &s in &self.sources {
            if !seen[s as usize] && self.is_purchased(s, y) {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &w in self.successors(u) {
                if !seen[w as usize] && self.is_purchased(w, y) {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Reward of every node reachable under `y`.
    pub fn evaluate(&self, y: &Strategy) -> f64 {
        self.reached(y)
            .iter()
            .zip(&self.rewards)
            .filter(|(r, _)| **r)
            .map(|(_, w)| *w)
            .sum()
    }

    /// Kahn topological order, or `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<u32>> {
        let mut deg = self.in_degrees();
        let mut order: Vec<u32> = (0..self.num_nodes() as u32).filter(|&v| deg[v as usize] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &w in self.successors(u) {
                deg[w as usize] -= 1;
                if deg[w as usize] == 0 {
                    order.push(w);
                }
            }
        }
        (order.len() == self.num_nodes()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Some node on a directed cycle, if any.
    pub fn cycle_witness(&self) -> Option<u32> {
        let order = self.topological_order();
        if order.is_some() {
            return None;
        }
        let mut deg = self.in_degrees();
        let mut stack: Vec<u32> = (0..self.num_nodes() as u32).filter(|&v| deg[v as usize] == 0).collect();
        let mut removed = vec![false; self.num_nodes()];
        while let Some(u) = stack.pop() {
            removed[u as usize] = true;
            for &w in self.successors(u) {
                deg[w as usize] -= 1;
                if deg[w as usize] == 0 {
                    stack.push(w);
                }
            }
        }
        // peel nodes that only lead out of the cyclic part
        let mut out: Vec<u32> = (0..self.num_nodes() as u32)
            .map(|u| self.successors(u).iter().filter(|&&w| !removed[w as usize]).count() as u32)
            .collect();
        let preds = self.predecessors();
        let mut stack: Vec<u32> =
            (0..self.num_nodes() as u32).filter(|&v| !removed[v as usize] && out[v as usize] == 0).collect();
        while let Some(v) = stack.pop() {
            removed[v as usize] = true;
            for &u in &preds[v as usize] {
                if !removed[u as usize] {
                    out[u as usize] -= 1;
                    if out[u as usize] == 0 {
                        stack.push(u);
                    }
                }
            }
        }
        removed.iter().position(|r| !r).map(|v| v as u32)
    }
}

#[derive(Serialize, Deserialize)]
struct CascadeRepr {
    rewards: Vec<f64>,
    action_sets: Vec<Vec<u32>>,
    edges: Vec<(u32, u32)>,
    sources: Vec<u32>,
}

impl From<Cascade> for CascadeRepr {
    fn from(c: Cascade) -> Self {
        CascadeRepr {
            edges: c.edges().collect(),
            action_sets: (0..c.num_nodes() as u32).map(|v| c.access(v).iter().map(|a| a.0).collect()).collect(),
            rewards: c.rewards,
            sources: c.sources,
        }
    }
}

impl TryFrom<CascadeRepr> for Cascade {
    type Error = CascadeError;

    fn try_from(r: CascadeRepr) -> Result<Self, Self::Error> {
        Cascade::new(
            r.rewards,
            r.action_sets.into_iter().map(|s| s.into_iter().map(ActionId).collect()).collect(),
            r.edges,
            r.sources,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(i: u32) -> ActionId {
        ActionId(i)
    }

    #[test]
    fn csr_normalizes_edges() {
        let c = Cascade::new(vec![0.0; 3], vec![vec![]; 3], vec![(1, 2), (0, 1), (1, 2), (2, 2)], vec![0, 0])
            .unwrap();
        assert_eq!(c.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(c.sources(), &[0]);
        assert!(c.is_acyclic());
    }

    #[test]
    fn out_of_range_rejected() {
        assert_eq!(
            Cascade::new(vec![0.0], vec![vec![]], vec![(0, 3)], vec![]).unwrap_err(),
            CascadeError::NodeOutOfRange(3)
        );
    }

    #[test]
    fn evaluate_free_and_priced() {
        // 0 (source) -> 1 -> 2
        let free = Cascade::new(vec![1.0, 2.0, 3.0], vec![vec![]; 3], vec![(0, 1), (1, 2)], vec![0]).unwrap();
        assert_eq!(free.evaluate(&Strategy::none(0)), 6.0);
        let priced = Cascade::new(
            vec![1.0, 2.0, 3.0],
            vec![vec![], vec![a(0)], vec![a(1)]],
            vec![(0, 1), (1, 2)],
            vec![0],
        )
        .unwrap();
        assert_eq!(priced.evaluate(&Strategy::none(2)), 1.0);
        assert_eq!(priced.evaluate(&Strategy::from_bits(vec![false, true])), 1.0);
        assert_eq!(priced.evaluate(&Strategy::all(2)), 6.0);
    }

    #[test]
    fn cycle_detection() {
        let c = Cascade::new(vec![0.0; 3], vec![vec![]; 3], vec![(0, 1), (1, 2), (2, 1)], vec![0]).unwrap();
        assert!(!c.is_acyclic());
        let w = c.cycle_witness().unwrap();
        assert!(w == 1 || w == 2);
    }

    #[test]
    fn json_round_trip() {
        let c = Cascade::new(vec![1.0, 0.5], vec![vec![], vec![a(2)]], vec![(0, 1)], vec![0]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Cascade>(&text).unwrap(), c);
    }
}
