//! Seed-selection policies.
//!
//! Every policy picks `L` distinct influencers per round and learns from the
//! attributed feedback. Index policies break ties toward the lowest arm id.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::Context;
use crate::error::{Error, Result};
use crate::ledger::{ArmId, Feedback};
use crate::linalg::{project_unit_ball, DesignMatrix};

mod baselines;
pub mod glm;
mod linucb;

pub use baselines::{OraclePolicy, RandomPolicy, Ucb1, ucb1_index};
pub use glm::{FatGtUcb, GlmGtUcb, IndexParts};
pub use linucb::{lognorm_update_target, LinTarget, LinUcbPolicy};

/// Fatigue function `f(n)`, non-increasing in the selection count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fatigue {
    /// `f(n) = 1/n`.
    #[default]
    Inverse,
    /// `f(n) = 1`.
    Constant,
}

impl Fatigue {
    pub fn eval(self, n: u64) -> f64 {
        match self {
            Fatigue::Inverse => 1.0 / n as f64,
            Fatigue::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub k: usize,
    pub l: usize,
    pub d: usize,
    /// Width of the contextual confidence bonus.
    pub gamma_expl: f64,
    /// Ridge penalty of the design matrices.
    pub gamma_reg: f64,
    pub delta: f64,
    pub fatigue: Fatigue,
    /// Extra activations added to the regression target only.
    pub boost: f64,
}

impl PolicyConfig {
    pub fn new(k: usize, l: usize, d: usize) -> Self {
        Self {
            k,
            l,
            d,
            gamma_expl: 1.0,
            gamma_reg: 1.0,
            delta: 0.05,
            fatigue: Fatigue::Inverse,
            boost: 0.0,
        }
    }

    /// `sqrt(1/2 · ln(sqrt(2TK/δ)))`.
    pub fn default_gamma_expl(horizon: usize, k: usize, delta: f64) -> f64 {
        (0.5 * (2.0 * horizon as f64 * k as f64 / delta).sqrt().ln()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.l > self.k {
            return Err(Error::config(format!(
                "need 1 <= L <= K, got L={} K={}",
                self.l, self.k
            )));
        }
        if self.d == 0 || self.d > crate::linalg::MAX_DIM {
            return Err(Error::config(format!("bad dimension {}", self.d)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        if !(self.gamma_expl.is_finite() && self.gamma_expl >= 0.0) {
            return Err(Error::config("gamma_expl must be finite and >= 0"));
        }
        if !(self.gamma_reg.is_finite() && self.gamma_reg > 0.0) {
            return Err(Error::config("gamma_reg must be finite and > 0"));
        }
        if !(self.boost.is_finite() && self.boost >= 0.0) {
            return Err(Error::config("boost must be finite and >= 0"));
        }
        Ok(())
    }
}

/// What a policy sees when asked to choose.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub t: u32,
    pub context: &'a Context,
    /// Best-first ranking, only supplied to policies that ask for it.
    pub oracle_ranking: Option<&'a [ArmId]>,
}

impl<'a> RoundView<'a> {
    pub fn new(t: u32, context: &'a Context) -> Self {
        Self {
            t,
            context,
            oracle_ranking: None,
        }
    }
}

/// Per-arm diagnostics emitted with `--trace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub arm: ArmId,
    pub n: u64,
    pub lambda_hat: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub theta_hat: Vec<f64>,
    pub index: Option<f64>,
    pub g: Option<f64>,
    pub beta: Option<f64>,
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    fn select(&mut self, round: &RoundView<'_>) -> Vec<ArmId>;

    /// `reward_share[i]` belongs to `chosen[i]`.
    fn update(
        &mut self,
        round: &RoundView<'_>,
        chosen: &[ArmId],
        feedback: &Feedback,
        reward_share: &[f64],
    ) -> Result<()>;

    fn needs_oracle(&self) -> bool {
        false
    }

    fn snapshot(&self) -> Vec<ArmSnapshot> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    GlmGtUcb,
    LogNormLinUcb,
    LinUcb,
    Ucb1,
    FatGtUcb,
    Random,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::GlmGtUcb,
        PolicyKind::LogNormLinUcb,
        PolicyKind::LinUcb,
        PolicyKind::Ucb1,
        PolicyKind::FatGtUcb,
        PolicyKind::Random,
        PolicyKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::GlmGtUcb => "glm-gt-ucb",
            PolicyKind::LogNormLinUcb => "lognorm-linucb",
            PolicyKind::LinUcb => "linucb",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::FatGtUcb => "fat-gt-ucb",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        }
    }

    /// Instantiate; `seed` only matters for randomized policies.
    pub fn build(self, cfg: &PolicyConfig, seed: u64) -> Result<Box<dyn Policy>> {
        cfg.validate()?;
        Ok(match self {
            PolicyKind::GlmGtUcb => Box::new(GlmGtUcb::new(cfg.clone())?),
            PolicyKind::LogNormLinUcb => Box::new(LinUcbPolicy::new(cfg.clone(), LinTarget::Log)?),
            PolicyKind::LinUcb => Box::new(LinUcbPolicy::new(cfg.clone(), LinTarget::Raw)?),
            PolicyKind::Ucb1 => Box::new(Ucb1::new(cfg.clone())),
            PolicyKind::FatGtUcb => Box::new(FatGtUcb::new(cfg.clone())?),
            PolicyKind::Random => Box::new(RandomPolicy::new(cfg.clone(), seed)),
            PolicyKind::Oracle => Box::new(OraclePolicy::new(cfg.clone())),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::config(format!("unknown policy '{s}'")))
    }
}

/// One selection of an arm, frozen at play time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayRecord {
    pub round: u32,
    pub context: Context,
    /// `C_k(s) = γ·‖Y_s‖_{V⁻¹}` with `V` as it was before this play.
    pub c_bonus: f64,
    /// External factor (or fatigue weight) used to discount this play's hapaxes.
    pub alpha_at_play: f64,
    /// `n_k(s)`, counting this play.
    pub n_at_play: u64,
    /// Regression target; `None` when the update was skipped.
    pub r_prime: Option<f64>,
    pub raw_new_activations: u64,
    /// `|F_s| / L`.
    pub activation_share: f64,
}

/// Per-arm sufficient statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluencerState {
    pub arm: ArmId,
    pub n: u64,
    pub design: DesignMatrix,
    pub s_vec: Vec<f64>,
    pub lambda_hat: f64,
    pub plays: Vec<PlayRecord>,
    activation_sum: f64,
}

impl InfluencerState {
    pub fn new(arm: ArmId, d: usize, gamma_reg: f64) -> Result<Self> {
        Ok(Self {
            arm,
            n: 0,
            design: DesignMatrix::new(d, gamma_reg)?,
            s_vec: vec![0.0; d],
            lambda_hat: 0.0,
            plays: Vec::new(),
            activation_sum: 0.0,
        })
    }

    /// `V⁻¹ s`, optionally projected onto the unit ball.
    pub fn theta_hat(&self, clamp: bool) -> Vec<f64> {
        let mut theta = self
            .design
            .solve(&self.s_vec)
            .expect("state vectors share the design dimension");
        if clamp {
            project_unit_ball(&mut theta);
        }
        theta
    }

    /// Count a play and fold `|F_s|/L` into `λ̂`.
    pub(crate) fn push_play(&mut self, mut play: PlayRecord) {
        self.n += 1;
        play.n_at_play = self.n;
        self.activation_sum += play.activation_share;
        self.lambda_hat = self.activation_sum / self.n as f64;
        self.plays.push(play);
    }

    /// Regression step `V += Y Yᵀ`, `s += target·Y`.
    pub(crate) fn regress(&mut self, y: &[f64], target: f64) -> Result<()> {
        self.design.update(y)?;
        for (s, v) in self.s_vec.iter_mut().zip(y) {
            *s += target * v;
        }
        Ok(())
    }
}

/// The `l` highest-scoring arms; ties and NaNs resolve toward low ids.
pub fn top_l(scores: &[f64], l: usize) -> Vec<ArmId> {
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    let mut arms: Vec<ArmId> = (0..scores.len()).collect();
    arms.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    arms.truncate(l);
    arms
}

/// Forced round-robin while some arm is unplayed: unplayed arms lowest id
/// first, topped up with the lowest-id played arms.
pub fn init_selection(counts: &[u64], l: usize) -> Option<Vec<ArmId>> {
    let mut pick: Vec<ArmId> = (0..counts.len()).filter(|&a| counts[a] == 0).take(l).collect();
    if pick.is_empty() {
        return None;
    }
    let fill: Vec<ArmId> = (0..counts.len())
        .filter(|&a| counts[a] > 0)
        .take(l - pick.len())
        .collect();
    pick.extend(fill);
    Some(pick)
}

/// Reject a selection/feedback pair that does not line up.
pub(crate) fn check_update(
    k: usize,
    chosen: &[ArmId],
    feedback: &Feedback,
    reward_share: &[f64],
) -> Result<()> {
    if reward_share.len() != chosen.len() {
        return Err(Error::DimensionMismatch {
            expected: chosen.len(),
            got: reward_share.len(),
        });
    }
    for (i, &a) in chosen.iter().enumerate() {
        if a >= k || chosen[..i].contains(&a) {
            return Err(Error::UnknownArm(a));
        }
    }
    if let Some(&a) = feedback.per_influencer.keys().find(|a| !chosen.contains(a)) {
        return Err(Error::UnknownArm(a));
    }
    Ok(())
}
