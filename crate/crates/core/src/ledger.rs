//! Campaign-wide activation history.
//!
//! The ledger counts how often each basic node has been activated, turns a
//! round's feedback into its reward (first-time activations only) and keeps
//! the per-(round, influencer) hapax counts that the Good-Turing estimators
//! read. A node activated exactly once is a hapax of the (round, influencer)
//! that activated it; the moment it is activated a second time it stops
//! counting for that origin.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of a basic node.
pub type NodeId = u64;

/// Index of an influencer (arm) in `0..K`.
pub type ArmId = usize;

/// Activations observed in one round, attributed per influencer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub round: u32,
    pub per_influencer: BTreeMap<ArmId, BTreeSet<NodeId>>,
}

impl Feedback {
    pub fn new(round: u32) -> Self {
        Self {
            round,
            per_influencer: BTreeMap::new(),
        }
    }

    /// All activated nodes of the round.
    pub fn union(&self) -> BTreeSet<NodeId> {
        self.per_influencer.values().flatten().copied().collect()
    }

    /// `|F_t|`: number of distinct activated nodes.
    pub fn activated(&self) -> usize {
        self.per_influencer.values().map(BTreeSet::len).sum()
    }

    pub fn nodes_of(&self, arm: ArmId) -> Option<&BTreeSet<NodeId>> {
        self.per_influencer.get(&arm)
    }

    /// Attribute an aggregate activation set to the chosen influencers,
    /// each node going to one of them uniformly at random.
    pub fn split_uniform<R: Rng + ?Sized>(
        round: u32,
        nodes: impl IntoIterator<Item = NodeId>,
        chosen: &[ArmId],
        rng: &mut R,
    ) -> Self {
        let mut fb = Feedback::new(round);
        for &arm in chosen {
            fb.per_influencer.entry(arm).or_default();
        }
        for node in nodes {
            if let Some(&arm) = chosen.choose(rng) {
                fb.per_influencer.entry(arm).or_default().insert(node);
            }
        }
        fb
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for nodes in self.per_influencer.values() {
            for &n in nodes {
                if !seen.insert(n) {
                    return Err(Error::OverlappingAttribution {
                        round: self.round,
                        node: n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// What a single `record` call changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordOutcome {
    /// Number of nodes never activated before this round.
    pub reward: u64,
    /// The same count split by the influencer the node was attributed to.
    pub new_per_influencer: BTreeMap<ArmId, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivationLedger {
    counts: BTreeMap<NodeId, u32>,
    unique_origin: BTreeMap<NodeId, (u32, ArmId)>,
    #[serde(with = "hapax_entries")]
    hapax: BTreeMap<(u32, ArmId), u64>,
    seen_total: u64,
    rewards: Vec<u64>,
    last_round: Option<u32>,
}

/// JSON maps need string keys, so the hapax table goes out as `[round, arm, count]` triples.
mod hapax_entries {
    use super::{ArmId, BTreeMap};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(u32, ArmId), u64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(|(&(r, a), &c)| (r, a, c)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, ArmId), u64>, D::Error> {
        let v = Vec::<(u32, ArmId, u64)>::deserialize(d)?;
        Ok(v.into_iter().map(|(r, a, c)| ((r, a), c)).collect())
    }
}

impl ActivationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold one round of feedback into the history.
    pub fn record(&mut self, fb: &Feedback) -> Result<RecordOutcome> {
        if let Some(last) = self.last_round {
            if fb.round <= last {
                return Err(Error::OutOfOrderRound {
                    last,
                    got: fb.round,
                });
            }
        }
        fb.check_disjoint()?;

        let mut out = RecordOutcome::default();
        for (&arm, nodes) in &fb.per_influencer {
            let mut fresh = 0;
            for &node in nodes {
                let count = self.counts.entry(node).or_insert(0);
                *count += 1;
                match *count {
                    1 => {
                        fresh += 1;
                        self.unique_origin.insert(node, (fb.round, arm));
                        *self.hapax.entry((fb.round, arm)).or_insert(0) += 1;
                    }
                    2 => {
                        if let Some(origin) = self.unique_origin.remove(&node) {
                            if let Some(h) = self.hapax.get_mut(&origin) {
                                *h -= 1;
                                if *h == 0 {
                                    self.hapax.remove(&origin);
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            if fresh > 0 {
                out.new_per_influencer.insert(arm, fresh);
            }
            out.reward += fresh;
        }

        self.seen_total += out.reward;
        self.rewards.push(out.reward);
        self.last_round = Some(fb.round);
        Ok(out)
    }

    /// Rewards in the order rounds were recorded.
    pub fn reward_history(&self) -> &[u64] {
        &self.rewards
    }

    /// Current number of hapaxes attributed to `(round, arm)`.
    pub fn hapax_count(&self, round: u32, arm: ArmId) -> u64 {
        self.hapax.get(&(round, arm)).copied().unwrap_or(0)
    }

    /// Number of distinct nodes activated so far.
    pub fn seen_total(&self) -> u64 {
        self.seen_total
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.counts.contains_key(&node)
    }

    /// `C_j(t)`.
    pub fn count(&self, node: NodeId) -> u32 {
        self.counts.get(&node).copied().unwrap_or(0)
    }

    /// Nodes currently seen exactly once.
    pub fn hapax_total(&self) -> u64 {
        self.hapax.values().sum()
    }
}
