//! Context-free baselines: uniform random, UCB1 and the oracle passthrough.

use rand::seq::index::sample;
use rand::SeedableRng;

use super::{check_update, init_selection, top_l, ArmSnapshot, Policy, PolicyConfig, RoundView};
use crate::env::SimRng;
use crate::error::Result;
use crate::ledger::{ArmId, Feedback};

/// `mean + sqrt(2 ln t / n)`.
pub fn ucb1_index(mean: f64, n: u64, t: u32) -> f64 {
    mean + (2.0 * (t as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    cfg: PolicyConfig,
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(cfg: PolicyConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: SimRng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&mut self, _round: &RoundView<'_>) -> Vec<ArmId> {
        let mut pick = sample(&mut self.rng, self.cfg.k, self.cfg.l).into_vec();
        pick.sort_unstable();
        pick
    }

    fn update(
        &mut self,
        _round: &RoundView<'_>,
        chosen: &[ArmId],
        feedback: &Feedback,
        reward_share: &[f64],
    ) -> Result<()> {
        check_update(self.cfg.k, chosen, feedback, reward_share)
    }
}

#[derive(Debug, Clone)]
pub struct Ucb1 {
    cfg: PolicyConfig,
    counts: Vec<u64>,
    sums: Vec<f64>,
    last: Vec<Option<f64>>,
}

impl Ucb1 {
    pub fn new(cfg: PolicyConfig) -> Self {
        Self {
            counts: vec![0; cfg.k],
            sums: vec![0.0; cfg.k],
            last: vec![None; cfg.k],
            cfg,
        }
    }

    pub fn mean(&self, arm: ArmId) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.counts[arm] as f64
        }
    }

    pub fn count(&self, arm: ArmId) -> u64 {
        self.counts[arm]
    }
}

impl Policy for Ucb1 {
    fn name(&self) -> &str {
        "ucb1"
    }

    fn select(&mut self, round: &RoundView<'_>) -> Vec<ArmId> {
        if let Some(pick) = init_selection(&self.counts, self.cfg.l) {
            return pick;
        }
        self.last = (0..self.cfg.k)
            .map(|a| Some(ucb1_index(self.mean(a), self.counts[a], round.t)))
            .collect();
        let scores: Vec<f64> = self.last.iter().map(|s| s.unwrap_or(f64::NEG_INFINITY)).collect();
        top_l(&scores, self.cfg.l)
    }

    fn update(
        &mut self,
        _round: &RoundView<'_>,
        chosen: &[ArmId],
        feedback: &Feedback,
        reward_share: &[f64],
    ) -> Result<()> {
        check_update(self.cfg.k, chosen, feedback, reward_share)?;
        for (&arm, &r) in chosen.iter().zip(reward_share) {
            self.counts[arm] += 1;
            self.sums[arm] += r;
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<ArmSnapshot> {
        (0..self.cfg.k)
            .map(|a| ArmSnapshot {
                arm: a,
                n: self.counts[a],
                lambda_hat: self.mean(a),
                theta_hat: Vec::new(),
                index: self.last[a],
                g: None,
                beta: None,
            })
            .collect()
    }
}

/// Plays the environment's own best-first ranking.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    cfg: PolicyConfig,
}

impl OraclePolicy {
    pub fn new(cfg: PolicyConfig) -> Self {
        Self { cfg }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn select(&mut self, round: &RoundView<'_>) -> Vec<ArmId> {
        match round.oracle_ranking {
            Some(rank) if rank.len() >= self.cfg.l => rank[..self.cfg.l].to_vec(),
            _ => (0..self.cfg.l).collect(),
        }
    }

    fn update(
        &mut self,
        _round: &RoundView<'_>,
        chosen: &[ArmId],
        feedback: &Feedback,
        reward_share: &[f64],
    ) -> Result<()> {
        check_update(self.cfg.k, chosen, feedback, reward_share)
    }

    fn needs_oracle(&self) -> bool {
        true
    }
}
