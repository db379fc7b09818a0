//! Barabási-Albert world with contextual threshold activations.
//!
//! Each basic node carries a hidden profile vector. When a cascade reaches
//! node `j` under context `Y`, the attempt succeeds iff
//! `sigmoid(<profile_j, Y> + eps) >= threshold`, with fresh gaussian `eps`
//! per attempt. Cascades spread breadth-first, one attempt per
//! (active node, inactive neighbour) pair, as in the independent cascade
//! model.
//!
//! In a viral round only `viral_arms` influencers diffuse under the drawn
//! context; the others diffuse under the mean of the normal context
//! distribution.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{rank_by_score, ContextDraw, Environment, SimRng};
use crate::env::Context;
use crate::error::{Error, Result};
use crate::ledger::{ActivationLedger, ArmId, Feedback, NodeId};
use crate::linalg::dot;

/// Gaussian context distribution, clipped componentwise to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub nodes: usize,
    pub edges_per_node: usize,
    pub influencers: usize,
    pub dim: usize,
    pub threshold: f64,
    pub noise_sigma: f64,
    pub viral_prob: f64,
    /// Influencers diffusing under the viral context in a viral round (L+1).
    pub viral_arms: usize,
    pub profile_mean: f64,
    pub profile_sigma: f64,
    pub normal_context: ContextParams,
    pub viral_context: ContextParams,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            nodes: 2000,
            edges_per_node: 1,
            influencers: 10,
            dim: 8,
            threshold: 0.999,
            noise_sigma: 3.0,
            viral_prob: 0.5,
            viral_arms: 3,
            profile_mean: 0.5,
            profile_sigma: 0.5,
            normal_context: ContextParams {
                mean: 0.3,
                sigma: 0.3,
            },
            viral_context: ContextParams {
                mean: 0.8,
                sigma: 0.3,
            },
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.edges_per_node == 0 || self.nodes <= self.edges_per_node {
            return Err(Error::config(format!(
                "need nodes > edges_per_node >= 1, got n={} m={}",
                self.nodes, self.edges_per_node
            )));
        }
        if self.influencers == 0 || self.influencers > self.nodes {
            return Err(Error::config(format!(
                "influencer count {} must be in 1..={}",
                self.influencers, self.nodes
            )));
        }
        if self.dim == 0 || self.dim > crate::linalg::MAX_DIM {
            return Err(Error::config(format!("bad context dimension {}", self.dim)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.viral_prob) {
            return Err(Error::config("viral_prob must lie in [0, 1]"));
        }
        let sigmas = [
            self.noise_sigma,
            self.profile_sigma,
            self.normal_context.sigma,
            self.viral_context.sigma,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::config("standard deviations must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    params: SyntheticParams,
    adjacency: Vec<Vec<u32>>,
    /// Row-major `nodes × dim`.
    profiles: Vec<f64>,
    influencers: Vec<NodeId>,
}

/// One node reached by a cascade, with its BFS depth from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reached {
    pub node: NodeId,
    pub depth: u32,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SyntheticWorld {
    /// Grow a preferential-attachment graph and draw node profiles.
    pub fn generate(params: SyntheticParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = SimRng::seed_from_u64(seed);
        let adjacency = barabasi_albert(params.nodes, params.edges_per_node, &mut rng);
        let normal = Normal::new(params.profile_mean, params.profile_sigma)
            .map_err(|e| Error::config(e.to_string()))?;
        let profiles = (0..params.nodes * params.dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let influencers = top_degree(&adjacency, params.influencers);
        Ok(Self {
            params,
            adjacency,
            profiles,
            influencers,
        })
    }

    /// Assemble a world from explicit parts; influencers are still chosen by degree.
    pub fn from_parts(
        params: SyntheticParams,
        adjacency: Vec<Vec<u32>>,
        profiles: Vec<f64>,
    ) -> Result<Self> {
        if adjacency.len() != params.nodes || profiles.len() != params.nodes * params.dim {
            return Err(Error::config("graph or profile table does not match params"));
        }
        if params.influencers == 0 || params.influencers > params.nodes {
            return Err(Error::config("bad influencer count"));
        }
        let influencers = top_degree(&adjacency, params.influencers);
        Ok(Self {
            params,
            adjacency,
            profiles,
            influencers,
        })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut SyntheticParams {
        &mut self.params
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.adjacency
    }

    pub fn influencers(&self) -> &[NodeId] {
        &self.influencers
    }

    pub fn profile(&self, node: NodeId) -> &[f64] {
        let d = self.params.dim;
        let i = node as usize;
        &self.profiles[i * d..(i + 1) * d]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node as usize].len()
    }

    /// Context vector `arm` diffuses under for this draw.
    pub fn effective_context<'a>(&'a self, draw: &'a ContextDraw, arm: ArmId) -> EffContext<'a> {
        if draw.viral && !draw.viral_set.contains(&arm) {
            EffContext::NormalMean(self.params.normal_context.mean)
        } else {
            EffContext::Drawn(&draw.context.vector)
        }
    }

    fn activation_score(&self, node: NodeId, ctx: &EffContext<'_>) -> f64 {
        match ctx {
            EffContext::Drawn(y) => dot(self.profile(node), y),
            EffContext::NormalMean(m) => m.clamp(0.0, 1.0) * self.profile(node).iter().sum::<f64>(),
        }
    }

    /// Single-seed independent cascade from `seed`, breadth-first.
    pub fn cascade(&self, seed: NodeId, ctx: &EffContext<'_>, rng: &mut SimRng) -> Vec<Reached> {
        let noise = if self.params.noise_sigma > 0.0 {
            Normal::new(0.0, self.params.noise_sigma).ok()
        } else {
            None
        };
        let mut active = BTreeSet::from([seed]);
        let mut queue = VecDeque::from([(seed, 0u32)]);
        let mut out = Vec::new();
        while let Some((u, depth)) = queue.pop_front() {
            for &v in &self.adjacency[u as usize] {
                let v = v as NodeId;
                if active.contains(&v) {
                    continue;
                }
                let eps = noise.as_ref().map_or(0.0, |n| n.sample(rng));
                if sigmoid(self.activation_score(v, ctx) + eps) >= self.params.threshold {
                    active.insert(v);
                    out.push(Reached {
                        node: v,
                        depth: depth + 1,
                    });
                    queue.push_back((v, depth + 1));
                }
            }
        }
        out
    }

    fn sample_context(&self, params: ContextParams, rng: &mut SimRng) -> Vec<f64> {
        let normal = Normal::new(params.mean, params.sigma).expect("validated sigma");
        (0..self.params.dim)
            .map(|_| normal.sample(rng).clamp(0.0, 1.0))
            .collect()
    }

    fn check_chosen(&self, chosen: &[ArmId]) -> Result<()> {
        match chosen.iter().find(|&&a| a >= self.influencers.len()) {
            Some(&a) => Err(Error::UnknownArm(a)),
            None => Ok(()),
        }
    }
}

/// Context an influencer's cascade runs under.
#[derive(Debug, Clone, Copy)]
pub enum EffContext<'a> {
    Drawn(&'a [f64]),
    /// Every coordinate equal to the normal-context mean.
    NormalMean(f64),
}

impl Environment for SyntheticWorld {
    fn num_arms(&self) -> usize {
        self.influencers.len()
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn universe_size(&self) -> usize {
        self.params.nodes
    }

    fn draw_context(&self, rng: &mut SimRng) -> ContextDraw {
        let viral = rng.random::<f64>() < self.params.viral_prob;
        let params = if viral {
            self.params.viral_context
        } else {
            self.params.normal_context
        };
        let vector = self.sample_context(params, rng);
        let viral_set = if viral {
            let k = self.influencers.len();
            sample(rng, k, self.params.viral_arms.min(k))
                .into_iter()
                .collect()
        } else {
            BTreeSet::new()
        };
        ContextDraw {
            context: Context::new(vector),
            viral,
            viral_set,
        }
    }

    fn step(
        &self,
        chosen: &[ArmId],
        draw: &ContextDraw,
        round: u32,
        rng: &mut SimRng,
    ) -> Result<Feedback> {
        self.check_chosen(chosen)?;
        let mut arms = chosen.to_vec();
        arms.sort_unstable();
        arms.dedup();

        // node -> (depth, arm); first reach wins, ties to the lower arm id
        let mut first: BTreeMap<NodeId, (u32, ArmId)> = BTreeMap::new();
        for &arm in &arms {
            let ctx = self.effective_context(draw, arm);
            for r in self.cascade(self.influencers[arm], &ctx, rng) {
                first
                    .entry(r.node)
                    .and_modify(|cur| {
                        if r.depth < cur.0 {
                            *cur = (r.depth, arm);
                        }
                    })
                    .or_insert((r.depth, arm));
            }
        }

        let mut fb = Feedback::new(round);
        for &arm in &arms {
            fb.per_influencer.entry(arm).or_default();
        }
        for (node, (_, arm)) in first {
            fb.per_influencer.entry(arm).or_default().insert(node);
        }
        Ok(fb)
    }

    fn true_ranking(
        &self,
        draw: &ContextDraw,
        ledger: &ActivationLedger,
        seed: u64,
    ) -> Result<Vec<ArmId>> {
        let mut rng = SimRng::seed_from_u64(seed);
        let scores: Vec<u64> = (0..self.influencers.len())
            .map(|arm| {
                let ctx = self.effective_context(draw, arm);
                self.cascade(self.influencers[arm], &ctx, &mut rng)
                    .iter()
                    .filter(|r| !ledger.contains(r.node))
                    .count() as u64
            })
            .collect();
        Ok(rank_by_score(&scores))
    }

    fn regime(&self, draw: &ContextDraw, arm: ArmId) -> String {
        match (draw.viral, draw.viral_set.contains(&arm)) {
            (false, _) => "normal".into(),
            (true, true) => "viral".into(),
            (true, false) => "viral-off".into(),
        }
    }
}

/// Preferential attachment: each arriving node links to `m` distinct
/// existing nodes chosen with probability proportional to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut SimRng) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    // every edge endpoint once; uniform draws from it are degree-proportional
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * n * m);
    for target in 0..m {
        adj[m].push(target as u32);
        adj[target].push(m as u32);
        endpoints.push(target as u32);
        endpoints.push(m as u32);
    }
    let mut picked = Vec::with_capacity(m);
    for new in (m + 1)..n {
        picked.clear();
        while picked.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        for &t in &picked {
            adj[new].push(t);
            adj[t as usize].push(new as u32);
            endpoints.push(t);
            endpoints.push(new as u32);
        }
    }
    adj
}

fn top_degree(adj: &[Vec<u32>], k: usize) -> Vec<NodeId> {
    let mut nodes: Vec<usize> = (0..adj.len()).collect();
    nodes.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()).then(a.cmp(&b)));
    nodes.truncate(k);
    nodes.into_iter().map(|n| n as NodeId).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nodes: usize, k: usize, d: usize) -> SyntheticParams {
        SyntheticParams {
            nodes,
            influencers: k,
            dim: d,
            noise_sigma: 0.0,
            ..SyntheticParams::default()
        }
    }

    #[test]
    fn small_tree_and_influencer() {
        let w = SyntheticWorld::generate(params(5, 1, 2), 11).unwrap();
        assert_eq!(w.edge_count(), 4);
        let max_deg = (0..5).map(|n| w.degree(n)).max().unwrap();
        assert_eq!(w.degree(w.influencers()[0]), max_deg);
    }

    #[test]
    fn large_graph_handshake() {
        let w = SyntheticWorld::generate(params(30_000, 10, 24), 5).unwrap();
        let degree_sum: usize = w.adjacency().iter().map(Vec::len).sum();
        assert_eq!(degree_sum, 2 * 29_999);
        let degs: Vec<usize> = w.influencers().iter().map(|&n| w.degree(n)).collect();
        assert!(degs.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn multi_edge_attachment_has_no_duplicates() {
        let p = SyntheticParams {
            edges_per_node: 3,
            ..params(300, 5, 2)
        };
        let w = SyntheticWorld::generate(p, 2).unwrap();
        assert_eq!(w.edge_count(), (300 - 3) * 3);
        for nbrs in w.adjacency() {
            let uniq: BTreeSet<_> = nbrs.iter().collect();
            assert_eq!(uniq.len(), nbrs.len());
        }
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(SyntheticWorld::generate(params(1, 1, 2), 0).is_err());
        assert!(SyntheticWorld::generate(params(5, 6, 2), 0).is_err());
        let p = SyntheticParams {
            edges_per_node: 0,
            ..params(5, 1, 2)
        };
        assert!(SyntheticWorld::generate(p, 0).is_err());
    }

    #[test]
    fn draw_context_viral_rules() {
        let mut p = params(50, 5, 3);
        p.viral_prob = 0.0;
        let w = SyntheticWorld::generate(p.clone(), 1).unwrap();
        let mut rng = SimRng::seed_from_u64(9);
        for _ in 0..200 {
            let d = w.draw_context(&mut rng);
            assert!(!d.viral && d.viral_set.is_empty());
            assert!(d.context.vector.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        p.viral_prob = 1.0;
        p.viral_arms = 3;
        let w = SyntheticWorld::generate(p, 1).unwrap();
        for _ in 0..200 {
            let d = w.draw_context(&mut rng);
            assert!(d.viral);
            assert_eq!(d.viral_set.len(), 3);
            assert!(d.context.vector.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    fn star_world(profiles: Vec<f64>, adjacency: Vec<Vec<u32>>, k: usize, d: usize) -> SyntheticWorld {
        let n = adjacency.len();
        SyntheticWorld::from_parts(params(n, k, d), adjacency, profiles).unwrap()
    }

    #[test]
    fn orthogonal_profiles_activate_nothing() {
        // path 0 - 1 - 2, context along x, profiles along y
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        let w = star_world(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0], adj, 1, 2);
        let draw = ContextDraw::plain(Context::new(vec![1.0, 0.0]));
        let fb = w.step(&[0], &draw, 1, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(fb.activated(), 0);
    }

    #[test]
    fn forced_activation_of_single_neighbour() {
        let adj = vec![vec![1], vec![0]];
        let w = star_world(vec![20.0, 0.0, 20.0, 0.0], adj, 1, 2);
        let draw = ContextDraw::plain(Context::new(vec![1.0, 0.0]));
        let seed = w.influencers()[0];
        let other = 1 - seed;
        let fb = w.step(&[0], &draw, 1, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(fb.nodes_of(0).unwrap(), &BTreeSet::from([other]));
    }

    #[test]
    fn path_cascade_reaches_both_hops() {
        // 1 is the hub of 0 - 1 - 2 - 3; from 1 the cascade reaches 0, 2 and then 3
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let w = star_world(vec![20.0; 4], adj, 1, 1);
        assert_eq!(w.influencers(), &[1]);
        let draw = ContextDraw::plain(Context::new(vec![1.0]));
        let reached = w.cascade(1, &EffContext::Drawn(&[1.0]), &mut SimRng::seed_from_u64(0));
        let depths: BTreeMap<NodeId, u32> = reached.iter().map(|r| (r.node, r.depth)).collect();
        assert_eq!(depths, BTreeMap::from([(0, 1), (2, 1), (3, 2)]));
        let fb = w.step(&[0], &draw, 1, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(fb.activated(), 3);
    }

    #[test]
    fn attribution_prefers_shallower_then_lower_arm() {
        // two hubs 0 and 1, sharing leaf 4; 0 also reaches 5 via 2
        //   0: 2,3,4   1: 4,6,7   2: 0,5
        let adj = vec![
            vec![2, 3, 4],
            vec![4, 6, 7],
            vec![0, 5],
            vec![0],
            vec![0, 1],
            vec![2],
            vec![1],
            vec![1],
        ];
        let w = star_world(vec![20.0; 8], adj, 2, 1);
        assert_eq!(w.influencers(), &[0, 1]);
        let draw = ContextDraw::plain(Context::new(vec![1.0]));
        let fb = w.step(&[1, 0], &draw, 3, &mut SimRng::seed_from_u64(0)).unwrap();
        // node 4 is depth 1 from both; arm 0 wins the tie
        assert!(fb.nodes_of(0).unwrap().contains(&4));
        assert!(!fb.nodes_of(1).unwrap().contains(&4));
        // hub 1 is reached by arm 0 at depth 2 via 4, hub 0 by arm 1 likewise
        assert!(fb.nodes_of(0).unwrap().contains(&1));
        assert!(fb.nodes_of(1).unwrap().contains(&0));
        let total: usize = fb.activated();
        assert_eq!(total, fb.union().len());
    }

    #[test]
    fn unknown_arm_rejected() {
        let adj = vec![vec![1], vec![0]];
        let w = star_world(vec![0.0; 2], adj, 1, 1);
        let draw = ContextDraw::plain(Context::new(vec![1.0]));
        assert!(matches!(
            w.step(&[3], &draw, 1, &mut SimRng::seed_from_u64(0)),
            Err(Error::UnknownArm(3))
        ));
    }

    #[test]
    fn true_ranking_picks_larger_cascade() {
        // hub 0 with 5 leaves, hub 6 with 3 leaves (disjoint components)
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); 10];
        let mut link = |a: usize, b: usize| {
            adj[a].push(b as u32);
            adj[b].push(a as u32);
        };
        for leaf in 1..=5 {
            link(0, leaf);
        }
        for leaf in 7..=9 {
            link(6, leaf);
        }
        let w = star_world(vec![20.0; 10], adj.clone(), 2, 1);
        let draw = ContextDraw::plain(Context::new(vec![1.0]));
        let ledger = ActivationLedger::new();
        assert_eq!(w.true_ranking(&draw, &ledger, 1).unwrap(), vec![0, 1]);

        // no activations at all: tie to lowest id
        let cold = star_world(vec![-20.0; 10], adj, 2, 1);
        assert_eq!(cold.true_ranking(&draw, &ledger, 1).unwrap()[0], 0);
    }

    #[test]
    fn true_ranking_single_influencer() {
        let adj = vec![vec![1], vec![0]];
        let w = star_world(vec![0.0; 2], adj, 1, 1);
        let draw = ContextDraw::plain(Context::new(vec![1.0]));
        assert_eq!(
            w.true_ranking(&draw, &ActivationLedger::new(), 4).unwrap(),
            vec![0]
        );
    }
}
