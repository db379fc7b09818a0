//! Campaign environments.
//!
//! An [`Environment`] hands out one context per round, turns a selection of
//! influencers into attributed [`Feedback`], and can rank influencers for
//! the oracle baseline without touching campaign randomness.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ledger::{ActivationLedger, ArmId, Feedback};

pub mod loglinear;
pub mod replay;
pub mod synthetic;

pub use loglinear::LogLinearBandit;
pub use replay::{loggen_synthesize, ReplayEnv, ReplayLog};
pub use synthetic::{ContextParams, SyntheticParams, SyntheticWorld};

/// Random stream used by every simulator in the crate.
pub type SimRng = ChaCha8Rng;

/// The round's feature vector `Y_t`, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id: Option<u32>,
}

impl Context {
    pub fn new(vector: Vec<f64>) -> Self {
        Self {
            vector,
            context_id: None,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// A drawn round context plus the viral bookkeeping needed to simulate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDraw {
    pub context: Context,
    pub viral: bool,
    pub viral_set: BTreeSet<ArmId>,
}

impl ContextDraw {
    pub fn plain(context: Context) -> Self {
        Self {
            context,
            viral: false,
            viral_set: BTreeSet::new(),
        }
    }
}

pub trait Environment: Send + Sync {
    fn num_arms(&self) -> usize;

    fn dim(&self) -> usize;

    /// Upper bound on the number of distinct nodes that can ever activate.
    fn universe_size(&self) -> usize;

    fn draw_context(&self, rng: &mut SimRng) -> ContextDraw;

    fn step(
        &self,
        chosen: &[ArmId],
        draw: &ContextDraw,
        round: u32,
        rng: &mut SimRng,
    ) -> Result<Feedback>;

    /// Influencers ordered by how many not-yet-activated nodes a single-seed
    /// play would reach this round, best first; ties go to the lower id.
    /// `seed` feeds a private stream so the campaign stream is untouched.
    fn true_ranking(
        &self,
        draw: &ContextDraw,
        ledger: &ActivationLedger,
        seed: u64,
    ) -> Result<Vec<ArmId>>;

    /// Label of the context regime `arm` faced in this draw.
    fn regime(&self, draw: &ContextDraw, arm: ArmId) -> String;
}

/// Sort arm scores descending, ties by lowest arm id.
pub fn rank_by_score(scores: &[u64]) -> Vec<ArmId> {
    let mut arms: Vec<ArmId> = (0..scores.len()).collect();
    arms.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    arms
}
