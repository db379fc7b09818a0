//! Disjoint LinUCB, regressing either the raw reward or its logarithm.
//!
//! LogNorm-LinUCB assumes log-normally distributed rewards, so each arm
//! regresses `ln r` on the context; the plain LinUCB baseline regresses `r`.
//! Both start from `V = γ_reg·I`, `s = 0` and need no warm-up phase.

use super::{
    check_update, top_l, ArmSnapshot, InfluencerState, PlayRecord, Policy, PolicyConfig,
    RoundView,
};
use crate::error::Result;
use crate::ledger::{ArmId, Feedback};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinTarget {
    /// `ln r`, floored at zero for `r < 1`.
    Log,
    Raw,
}

/// `(ln r, false)` for `r >= 1`, `(0, true)` otherwise.
pub fn lognorm_update_target(reward: f64) -> (f64, bool) {
    if reward >= 1.0 {
        (reward.ln(), false)
    } else {
        (0.0, true)
    }
}

/// `<θ̂, Y> + γ·‖Y‖_{V⁻¹}` with `θ̂ = V⁻¹ s`.
pub fn lin_index(state: &InfluencerState, y: &[f64], gamma_expl: f64) -> Result<f64> {
    let theta = state.design.solve(&state.s_vec)?;
    Ok(dot(&theta, y) + gamma_expl * state.design.quad_norm(y)?)
}

#[derive(Debug, Clone)]
pub struct LinUcbPolicy {
    cfg: PolicyConfig,
    target: LinTarget,
    states: Vec<InfluencerState>,
    last: Vec<Option<f64>>,
    floored: u64,
}

impl LinUcbPolicy {
    pub fn new(cfg: PolicyConfig, target: LinTarget) -> Result<Self> {
        cfg.validate()?;
        let states = (0..cfg.k)
            .map(|a| InfluencerState::new(a, cfg.d, cfg.gamma_reg))
            .collect::<Result<_>>()?;
        Ok(Self {
            last: vec![None; cfg.k],
            cfg,
            target,
            states,
            floored: 0,
        })
    }

    pub fn states(&self) -> &[InfluencerState] {
        &self.states
    }

    /// Updates whose reward was below one and had its logarithm floored.
    pub fn floored_updates(&self) -> u64 {
        self.floored
    }

    pub fn index(&self, arm: ArmId, y: &[f64]) -> Result<f64> {
        lin_index(&self.states[arm], y, self.cfg.gamma_expl)
    }
}

impl Policy for LinUcbPolicy {
    fn name(&self) -> &str {
        match self.target {
            LinTarget::Log => "lognorm-linucb",
            LinTarget::Raw => "linucb",
        }
    }

    fn select(&mut self, round: &RoundView<'_>) -> Vec<ArmId> {
        let y = &round.context.vector;
        self.last = (0..self.cfg.k).map(|a| self.index(a, y).ok()).collect();
        let scores: Vec<f64> = self
            .last
            .iter()
            .map(|s| s.unwrap_or(f64::NEG_INFINITY))
            .collect();
        top_l(&scores, self.cfg.l)
    }

    fn update(
        &mut self,
        round: &RoundView<'_>,
        chosen: &[ArmId],
        feedback: &Feedback,
        reward_share: &[f64],
    ) -> Result<()> {
        check_update(self.cfg.k, chosen, feedback, reward_share)?;
        let y = &round.context.vector;
        let share = feedback.activated() as f64 / self.cfg.l as f64;
        for (&arm, &reward) in chosen.iter().zip(reward_share) {
            let target = match self.target {
                LinTarget::Log => {
                    let (v, floored) = lognorm_update_target(reward);
                    self.floored += u64::from(floored);
                    v
                }
                LinTarget::Raw => reward,
            };
            let st = &mut self.states[arm];
            let c_bonus = self.cfg.gamma_expl * st.design.quad_norm(y)?;
            st.regress(y, target)?;
            st.push_play(PlayRecord {
                round: feedback.round,
                context: round.context.clone(),
                c_bonus,
                alpha_at_play: 1.0,
                n_at_play: 0,
                r_prime: Some(target),
                raw_new_activations: 0,
                activation_share: share,
            });
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<ArmSnapshot> {
        self.states
            .iter()
            .zip(&self.last)
            .map(|(s, idx)| ArmSnapshot {
                arm: s.arm,
                n: s.n,
                lambda_hat: s.lambda_hat,
                theta_hat: s.theta_hat(false),
                index: *idx,
                g: None,
                beta: None,
            })
            .collect()
    }
}
