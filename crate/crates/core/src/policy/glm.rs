//! Good-Turing policies: GLM-GT-UCB and its context-free FAT-GT-UCB baseline.
//!
//! GLM-GT-UCB estimates an influencer's remaining potential with a
//! Good-Turing estimator whose hapaxes are reweighted by an external factor
//!
//! ```text
//! α(x, n) = exp(f(n) · x),   x = <θ̂_k, Y_t> + C_k(t),   C_k(t) = γ‖Y_t‖_{V_k⁻¹}
//! ```
//!
//! where `θ̂_k` is learned by ridge regression on the targets
//!
//! ```text
//! r'_k = ln( r · n_k / Σ_s hapax(s,k) / α_s ) / f(n_k).
//! ```
//!
//! The index is `b_k = G_k + β_k + bias_k`:
//!
//! ```text
//! G_k    = α_now · (1/n) · Σ_s hapax(s,k) / α_s
//! β_k    = sqrt( 2 λ̂ e^{(3+2C)/n} Σ_s e^{(2-2C_s)/n_s} / n² · ln(1/δ) )
//!        + sqrt( e^{2/n} λ̂ ln(1/δ) / Σ_{s, k'∈I_s} e^{-1/n_{k'}(s)} )
//!        + e^{(1+C)/n} Σ_s e^{(1+C_s)/n_s} / (3n) · ln(1/δ)
//! bias_k = λ̂ · (1 - e^{(-2+C)/n} · (1/n) · Σ_s e^{(-2-C_s)/n_s})
//! ```
//!
//! Sums over `s` run over the arm's own plays; `α_s`, `C_s` and `n_s` are
//! frozen when the play happens (`n_s` counts that play).
//!
//! FAT-GT-UCB keeps the same confidence terms with every `C` set to zero and
//! replaces the external factor by the fatigue weights:
//! `Ĝ = f(n+1) · (1/n) · Σ_s hapax(s,k) / f(n_s)`.

use serde::{Deserialize, Serialize};

use super::{
    check_update, init_selection, top_l, ArmSnapshot, Fatigue, InfluencerState, PlayRecord,
    Policy, PolicyConfig, RoundView,
};
use crate::error::{Error, Result};
use crate::ledger::{ActivationLedger, ArmId, Feedback};
use crate::linalg::dot;

/// `exp(f(n) · (<θ̂, Y> + c_bonus))`.
pub fn glm_alpha(theta_hat: &[f64], y: &[f64], n: u64, c_bonus: f64, fatigue: Fatigue) -> f64 {
    (fatigue.eval(n) * (dot(theta_hat, y) + c_bonus)).exp()
}

/// `Σ_s hapax(s,k) / α_s` over the arm's plays.
pub fn discounted_hapax(state: &InfluencerState, ledger: &ActivationLedger) -> f64 {
    state
        .plays
        .iter()
        .map(|p| ledger.hapax_count(p.round, state.arm) as f64 / p.alpha_at_play)
        .sum()
}

/// `G_k = α_now · (1/n) · Σ_s hapax(s,k) / α_s`; zero for an unplayed arm.
pub fn glm_good_turing(state: &InfluencerState, ledger: &ActivationLedger, alpha_now: f64) -> f64 {
    if state.n == 0 {
        return 0.0;
    }
    alpha_now * discounted_hapax(state, ledger) / state.n as f64
}

/// `Σ_{s, k' ∈ I_s} e^{-1/n_{k'}(s)}` over every recorded play of every arm.
pub fn play_denominator(states: &[InfluencerState]) -> f64 {
    states
        .iter()
        .flat_map(|s| &s.plays)
        .map(|p| (-1.0 / p.n_at_play as f64).exp())
        .sum()
}

/// Confidence width `β_k`.
pub fn glm_beta(state: &InfluencerState, c_now: f64, denominator: f64, delta: f64) -> Result<f64> {
    if state.n == 0 || denominator <= 0.0 {
        return Err(Error::EmptyHistory);
    }
    let n = state.n as f64;
    let lambda = state.lambda_hat;
    let log_term = (1.0 / delta).ln();

    let bennett_sum: f64 = state
        .plays
        .iter()
        .map(|p| ((2.0 - 2.0 * p.c_bonus) / p.n_at_play as f64).exp())
        .sum();
    let bennett = (2.0 * lambda * ((3.0 + 2.0 * c_now) / n).exp() * bennett_sum / (n * n) * log_term)
        .max(0.0)
        .sqrt();

    let potential = ((2.0 / n).exp() * lambda * log_term / denominator).max(0.0).sqrt();

    let linear_sum: f64 = state
        .plays
        .iter()
        .map(|p| ((1.0 + p.c_bonus) / p.n_at_play as f64).exp())
        .sum();
    let linear = ((1.0 + c_now) / n).exp() * linear_sum / (3.0 * n) * log_term;

    Ok(bennett + potential + linear)
}

/// Bias correction `λ̂ · (1 − e^{(−2+C)/n} · (1/n) · Σ_s e^{(−2−C_s)/n_s})`.
pub fn glm_bias(state: &InfluencerState, c_now: f64) -> f64 {
    if state.n == 0 {
        return 0.0;
    }
    let n = state.n as f64;
    let sum: f64 = state
        .plays
        .iter()
        .map(|p| ((-2.0 - p.c_bonus) / p.n_at_play as f64).exp())
        .sum();
    state.lambda_hat * (1.0 - ((-2.0 + c_now) / n).exp() * sum / n)
}

/// `ln((r + boost) · n / discounted) / f(n)`, or `None` when the logarithm
/// is undefined (no reward or no surviving hapaxes).
pub fn glm_regression_target(
    reward: f64,
    n: u64,
    discounted: f64,
    boost: f64,
    fatigue: Fatigue,
) -> Option<f64> {
    let r = reward + boost;
    if n == 0 || r <= 0.0 || discounted <= 0.0 {
        return None;
    }
    Some((r * n as f64 / discounted).ln() / fatigue.eval(n))
}

/// Everything that went into one arm's index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexParts {
    pub theta_hat: Vec<f64>,
    pub c_bonus: f64,
    pub alpha: f64,
    pub g: f64,
    pub beta: f64,
    pub bias: f64,
    pub index: f64,
}

fn snapshot_of(states: &[InfluencerState], last: &[Option<IndexParts>]) -> Vec<ArmSnapshot> {
    states
        .iter()
        .zip(last)
        .map(|(s, p)| ArmSnapshot {
            arm: s.arm,
            n: s.n,
            lambda_hat: s.lambda_hat,
            theta_hat: p.as_ref().map(|p| p.theta_hat.clone()).unwrap_or_default(),
            index: p.as_ref().map(|p| p.index),
            g: p.as_ref().map(|p| p.g),
            beta: p.as_ref().map(|p| p.beta),
        })
        .collect()
}

/// GLM-GT-UCB.
#[derive(Debug, Clone)]
pub struct GlmGtUcb {
    cfg: PolicyConfig,
    states: Vec<InfluencerState>,
    ledger: ActivationLedger,
    denominator: f64,
    last: Vec<Option<IndexParts>>,
}

impl GlmGtUcb {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let states = (0..cfg.k)
            .map(|a| InfluencerState::new(a, cfg.d, cfg.gamma_reg))
            .collect::<Result<_>>()?;
        Ok(Self {
            last: vec![None; cfg.k],
            cfg,
            states,
            ledger: ActivationLedger::new(),
            denominator: 0.0,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[InfluencerState] {
        &self.states
    }

    pub fn ledger(&self) -> &ActivationLedger {
        &self.ledger
    }

    /// Running `Σ e^{-1/n_{k'}(s)}` over all plays.
    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    pub fn in_init_phase(&self) -> bool {
        self.states.iter().any(|s| s.n == 0)
    }

    /// Index of `arm` under context `y`. Needs the arm to have been played.
    pub fn index_parts(&self, arm: ArmId, y: &[f64]) -> Result<IndexParts> {
        let st = &self.states[arm];
        let theta_hat = st.theta_hat(true);
        let c_bonus = self.cfg.gamma_expl * st.design.quad_norm(y)?;
        let alpha = glm_alpha(&theta_hat, y, st.n.max(1), c_bonus, self.cfg.fatigue);
        let g = glm_good_turing(st, &self.ledger, alpha);
        let beta = glm_beta(st, c_bonus, self.denominator, self.cfg.delta)?;
        let bias = glm_bias(st, c_bonus);
        Ok(IndexParts {
            theta_hat,
            c_bonus,
            alpha,
            g,
            beta,
            bias,
            index: g + beta + bias,
        })
    }
}

impl Policy for GlmGtUcb {
    fn name(&self) -> &str {
        "glm-gt-ucb"
    }

    fn select(&mut self, round: &RoundView<'_>) -> Vec<ArmId> {
        let counts: Vec<u64> = self.states.iter().map(|s| s.n).collect();
        if let Some(pick) = init_selection(&counts, self.cfg.l) {
            return pick;
        }
        let y = &round.context.vector;
        self.last = (0..self.cfg.k).map(|a| self.index_parts(a, y).ok()).collect();
        let scores: Vec<f64> = self
            .last
            .iter()
            .map(|p| p.as_ref().map_or(f64::NEG_INFINITY, |p| p.index))
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
        let outcome = self.ledger.record(feedback)?;
        let share = feedback.activated() as f64 / self.cfg.l as f64;

        for &arm in chosen {
            let st = &mut self.states[arm];
            let theta_hat = st.theta_hat(true);
            let c_bonus = self.cfg.gamma_expl * st.design.quad_norm(y)?;
            let alpha_at_play = glm_alpha(&theta_hat, y, st.n + 1, 0.0, self.cfg.fatigue);
            st.push_play(PlayRecord {
                round: feedback.round,
                context: round.context.clone(),
                c_bonus,
                alpha_at_play,
                n_at_play: 0,
                r_prime: None,
                raw_new_activations: outcome.new_per_influencer.get(&arm).copied().unwrap_or(0),
                activation_share: share,
            });
            self.denominator += (-1.0 / st.n as f64).exp();
        }

        for (&arm, &reward) in chosen.iter().zip(reward_share) {
            let st = &mut self.states[arm];
            let discounted = discounted_hapax(st, &self.ledger);
            if let Some(target) =
                glm_regression_target(reward, st.n, discounted, self.cfg.boost, self.cfg.fatigue)
            {
                st.regress(y, target)?;
                if let Some(p) = st.plays.last_mut() {
                    p.r_prime = Some(target);
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<ArmSnapshot> {
        snapshot_of(&self.states, &self.last)
    }
}

/// FAT-GT-UCB: fatigue-adjusted Good-Turing UCB without contexts.
#[derive(Debug, Clone)]
pub struct FatGtUcb {
    cfg: PolicyConfig,
    states: Vec<InfluencerState>,
    ledger: ActivationLedger,
    denominator: f64,
    last: Vec<Option<IndexParts>>,
}

impl FatGtUcb {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let states = (0..cfg.k)
            .map(|a| InfluencerState::new(a, cfg.d, cfg.gamma_reg))
            .collect::<Result<_>>()?;
        Ok(Self {
            last: vec![None; cfg.k],
            cfg,
            states,
            ledger: ActivationLedger::new(),
            denominator: 0.0,
        })
    }

    pub fn states(&self) -> &[InfluencerState] {
        &self.states
    }

    pub fn index_parts(&self, arm: ArmId) -> Result<IndexParts> {
        let st = &self.states[arm];
        let alpha = self.cfg.fatigue.eval(st.n + 1);
        let g = glm_good_turing(st, &self.ledger, alpha);
        let beta = glm_beta(st, 0.0, self.denominator, self.cfg.delta)?;
        let bias = glm_bias(st, 0.0);
        Ok(IndexParts {
            theta_hat: Vec::new(),
            c_bonus: 0.0,
            alpha,
            g,
            beta,
            bias,
            index: g + beta + bias,
        })
    }
}

impl Policy for FatGtUcb {
    fn name(&self) -> &str {
        "fat-gt-ucb"
    }

    fn select(&mut self, _round: &RoundView<'_>) -> Vec<ArmId> {
        let counts: Vec<u64> = self.states.iter().map(|s| s.n).collect();
        if let Some(pick) = init_selection(&counts, self.cfg.l) {
            return pick;
        }
        self.last = (0..self.cfg.k).map(|a| self.index_parts(a).ok()).collect();
        let scores: Vec<f64> = self
            .last
            .iter()
            .map(|p| p.as_ref().map_or(f64::NEG_INFINITY, |p| p.index))
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
        let outcome = self.ledger.record(feedback)?;
        let share = feedback.activated() as f64 / self.cfg.l as f64;
        for &arm in chosen {
            let st = &mut self.states[arm];
            let weight = self.cfg.fatigue.eval(st.n + 1);
            st.push_play(PlayRecord {
                round: feedback.round,
                context: round.context.clone(),
                c_bonus: 0.0,
                alpha_at_play: weight,
                n_at_play: 0,
                r_prime: None,
                raw_new_activations: outcome.new_per_influencer.get(&arm).copied().unwrap_or(0),
                activation_share: share,
            });
            self.denominator += (-1.0 / st.n as f64).exp();
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<ArmSnapshot> {
        snapshot_of(&self.states, &self.last)
    }
}
