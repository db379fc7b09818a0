//! Stationary log-linear bandit with known parameters.
//!
//! Pulling arm `k` under context `Y` yields `r = exp(<theta_k, Y> + eta)`
//! with gaussian `eta`. Used to check regret trends where the true
//! parameters are available.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Context, SimRng};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearBandit {
    thetas: Vec<Vec<f64>>,
    noise_sigma: f64,
}

impl LogLinearBandit {
    pub fn new(thetas: Vec<Vec<f64>>, noise_sigma: f64) -> Result<Self> {
        let d = thetas.first().map_or(0, Vec::len);
        if d == 0 || thetas.iter().any(|t| t.len() != d) {
            return Err(Error::config("arm parameters must share one positive dimension"));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::config("noise sigma must be finite and >= 0"));
        }
        Ok(Self { thetas, noise_sigma })
    }

    /// Arms with parameters drawn uniformly from `[lo, hi]^d`.
    pub fn random(k: usize, d: usize, lo: f64, hi: f64, noise_sigma: f64, rng: &mut SimRng) -> Result<Self> {
        let thetas = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(lo..=hi)).collect())
            .collect();
        Self::new(thetas, noise_sigma)
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn num_arms(&self) -> usize {
        self.thetas.len()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }

    /// Context uniform on `[0, 1]^d`.
    pub fn draw_context(&self, rng: &mut SimRng) -> Context {
        Context::new((0..self.dim()).map(|_| rng.random::<f64>()).collect())
    }

    /// Log-scale reward of one pull.
    pub fn pull_log(&self, arm: usize, ctx: &Context, rng: &mut SimRng) -> f64 {
        let mean = dot(&self.thetas[arm], &ctx.vector);
        let eta = if self.noise_sigma > 0.0 {
            Normal::new(0.0, self.noise_sigma)
                .expect("validated sigma")
                .sample(rng)
        } else {
            0.0
        };
        mean + eta
    }

    /// `max_k <theta_k, Y>`.
    pub fn best_mean(&self, ctx: &Context) -> f64 {
        self.thetas
            .iter()
            .map(|t| dot(t, &ctx.vector))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
