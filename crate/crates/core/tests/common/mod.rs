//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the crate's numerics.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ctxim::ledger::{ArmId, Feedback, NodeId};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Hapax counts recomputed from the full history every time.
#[derive(Debug, Default, Clone)]
pub struct BruteLedger {
    pub rounds: Vec<Feedback>,
}

impl BruteLedger {
    pub fn push(&mut self, fb: Feedback) {
        self.rounds.push(fb);
    }

    pub fn counts(&self) -> BTreeMap<NodeId, u32> {
        let mut c = BTreeMap::new();
        for fb in &self.rounds {
            for set in fb.per_influencer.values() {
                for &n in set {
                    *c.entry(n).or_insert(0) += 1;
                }
            }
        }
        c
    }

    pub fn hapax(&self, round: u32, arm: ArmId) -> u64 {
        let counts = self.counts();
        self.rounds
            .iter()
            .filter(|fb| fb.round == round)
            .filter_map(|fb| fb.per_influencer.get(&arm))
            .flatten()
            .filter(|n| counts[n] == 1)
            .count() as u64
    }

    pub fn distinct(&self) -> usize {
        self.counts().len()
    }
}

/// Random disjoint feedback for `chosen` drawn from nodes `0..universe`.
pub fn random_feedback(
    rng: &mut ChaCha8Rng,
    round: u32,
    chosen: &[ArmId],
    universe: u64,
    max_per_arm: usize,
) -> Feedback {
    let mut fb = Feedback::new(round);
    let mut taken = BTreeSet::new();
    for &arm in chosen {
        let want = rng.random_range(0..=max_per_arm);
        let mut set = BTreeSet::new();
        for _ in 0..want {
            let n = rng.random_range(0..universe);
            if taken.insert(n) {
                set.insert(n);
            }
        }
        fb.per_influencer.insert(arm, set);
    }
    fb
}

pub fn random_selection(rng: &mut ChaCha8Rng, k: usize, l: usize) -> Vec<ArmId> {
    let mut v = sample(rng, k, l).into_vec();
    v.sort_unstable();
    v
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn clamp_unit(mut v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 1.0 {
        v /= n;
    }
    v
}

struct RefPlay {
    round: u32,
    n: u64,
    c: f64,
    alpha: f64,
    share: f64,
}

struct RefArm {
    v: DMatrix<f64>,
    s: DVector<f64>,
    n: u64,
    plays: Vec<RefPlay>,
}

/// Straight-line GLM-GT-UCB bookkeeping with inverse fatigue `f(n) = 1/n`.
pub struct RefGlm {
    pub gamma: f64,
    pub delta: f64,
    pub l: usize,
    pub boost: f64,
    arms: Vec<RefArm>,
    pub history: BruteLedger,
    denom: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RefIndex {
    pub alpha: f64,
    pub g: f64,
    pub beta: f64,
    pub bias: f64,
    pub index: f64,
}

impl RefGlm {
    pub fn new(k: usize, d: usize, l: usize, gamma: f64, gamma_reg: f64, delta: f64) -> Self {
        Self {
            gamma,
            delta,
            l,
            boost: 0.0,
            arms: (0..k)
                .map(|_| RefArm {
                    v: DMatrix::identity(d, d) * gamma_reg,
                    s: DVector::zeros(d),
                    n: 0,
                    plays: vec![],
                })
                .collect(),
            history: BruteLedger::default(),
            denom: 0.0,
        }
    }

    fn theta(arm: &RefArm) -> DVector<f64> {
        clamp_unit(arm.v.clone().try_inverse().unwrap() * &arm.s)
    }

    fn width(arm: &RefArm, y: &DVector<f64>) -> f64 {
        let vinv = arm.v.clone().try_inverse().unwrap();
        (y.transpose() * vinv * y)[(0, 0)].max(0.0).sqrt()
    }

    pub fn update(&mut self, y: &[f64], chosen: &[ArmId], fb: &Feedback, reward_share: &[f64]) {
        let yv = DVector::from_column_slice(y);
        let activated: usize = fb.per_influencer.values().map(BTreeSet::len).sum();
        self.history.push(fb.clone());
        for &a in chosen {
            let arm = &mut self.arms[a];
            let theta = Self::theta(arm);
            let c = self.gamma * Self::width(arm, &yv);
            arm.n += 1;
            let alpha = (theta.dot(&yv) / arm.n as f64).exp();
            arm.plays.push(RefPlay {
                round: fb.round,
                n: arm.n,
                c,
                alpha,
                share: activated as f64 / self.l as f64,
            });
            self.denom += (-1.0 / arm.n as f64).exp();
        }
        for (&a, &r) in chosen.iter().zip(reward_share) {
            let disc: f64 = self.arms[a]
                .plays
                .iter()
                .map(|p| self.history.hapax(p.round, a) as f64 / p.alpha)
                .sum();
            let r = r + self.boost;
            if r > 0.0 && disc > 0.0 {
                let arm = &mut self.arms[a];
                let n = arm.n as f64;
                let target = (r * n / disc).ln() * n;
                arm.v += &yv * yv.transpose();
                arm.s += &yv * target;
            }
        }
    }

    pub fn index(&self, a: ArmId, y: &[f64]) -> RefIndex {
        let yv = DVector::from_column_slice(y);
        let arm = &self.arms[a];
        let n = arm.n as f64;
        let theta = Self::theta(arm);
        let c = self.gamma * Self::width(arm, &yv);
        let alpha = ((theta.dot(&yv) + c) / n).exp();
        let mut gsum = 0.0;
        for p in &arm.plays {
            gsum += self.history.hapax(p.round, a) as f64 / p.alpha;
        }
        let g = alpha * gsum / n;
        let lambda: f64 = arm.plays.iter().map(|p| p.share).sum::<f64>() / n;
        let ld = (1.0 / self.delta).ln();

        let mut b1 = 0.0;
        for p in &arm.plays {
            b1 += ((2.0 - 2.0 * p.c) / p.n as f64).exp();
        }
        let term1 = (2.0 * lambda * ((3.0 + 2.0 * c) / n).exp() * b1 / (n * n) * ld).sqrt();
        let term2 = ((2.0 / n).exp() * lambda * ld / self.denom).sqrt();
        let mut b3 = 0.0;
        for p in &arm.plays {
            b3 += ((1.0 + p.c) / p.n as f64).exp();
        }
        let term3 = ((1.0 + c) / n).exp() * b3 / (3.0 * n) * ld;
        let beta = term1 + term2 + term3;

        let mut bs = 0.0;
        for p in &arm.plays {
            bs += ((-2.0 - p.c) / p.n as f64).exp();
        }
        let bias = lambda * (1.0 - ((-2.0 + c) / n).exp() * bs / n);
        RefIndex {
            alpha,
            g,
            beta,
            bias,
            index: g + beta + bias,
        }
    }
}

/// Disjoint LinUCB on `ln r` (floored at 0) with direct solves.
pub struct RefLogNorm {
    gamma: f64,
    v: Vec<DMatrix<f64>>,
    s: Vec<DVector<f64>>,
}

impl RefLogNorm {
    pub fn new(k: usize, d: usize, gamma: f64, gamma_reg: f64) -> Self {
        Self {
            gamma,
            v: vec![DMatrix::identity(d, d) * gamma_reg; k],
            s: vec![DVector::zeros(d); k],
        }
    }

    pub fn update(&mut self, y: &[f64], chosen: &[ArmId], reward_share: &[f64]) {
        let yv = DVector::from_column_slice(y);
        for (&a, &r) in chosen.iter().zip(reward_share) {
            let target = if r >= 1.0 { r.ln() } else { 0.0 };
            self.v[a] += &yv * yv.transpose();
            self.s[a] += &yv * target;
        }
    }

    pub fn index(&self, a: ArmId, y: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        let vinv = self.v[a].clone().try_inverse().unwrap();
        let theta = &vinv * &self.s[a];
        theta.dot(&yv) + self.gamma * (yv.transpose() * vinv * &yv)[(0, 0)].sqrt()
    }
}
