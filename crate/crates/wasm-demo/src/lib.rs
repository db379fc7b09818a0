//! Browser bindings: a small campaign, a GLM-GT-UCB index breakdown and a
//! Poisson fit. Every export takes and returns JSON strings.

use ctxim::analysis::poisson_fit;
use ctxim::env::{Context, SyntheticParams};
use ctxim::harness::{EnvironmentSpec, PolicySpec};
use ctxim::ledger::{ActivationLedger, Feedback};
use ctxim::policy::glm::GlmGtUcb;
use ctxim::policy::{Policy, PolicyConfig, RoundView};
use ctxim::{run_campaign, CampaignConfig, RunOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Campaign on a small synthetic world; returns `{universe, curves: [{policy, mean, std}]}`.
pub fn campaign_json(nodes: usize, rounds: usize, runs: usize, seed: u64) -> Result<String, String> {
    let cfg = CampaignConfig {
        environment: EnvironmentSpec::Synthetic(SyntheticParams {
            nodes,
            ..SyntheticParams::default()
        }),
        policies: ["oracle", "glm-gt-ucb", "lognorm-linucb", "ucb1", "random"]
            .iter()
            .map(|p| PolicySpec::Name(p.to_string()))
            .collect(),
        horizon: rounds,
        runs,
        l: 2,
        k: 10,
        d: 8,
        seed,
        delta: 0.05,
        gamma_expl: None,
        gamma_reg: 1.0,
        boost_enabled: false,
    };
    let res = run_campaign(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    let curves: Vec<Value> = res
        .curves
        .iter()
        .map(|c| json!({"policy": c.policy, "mean": c.mean, "std": c.std}))
        .collect();
    Ok(json!({"universe": res.universe, "curves": curves}).to_string())
}

/// Index of one influencer after a scripted history.
///
/// `history` is `[{"context": [..], "nodes": [..]}, ..]`, each entry one play
/// of influencer 0 with the nodes it activated; `query` is the context to
/// score. Returns the index decomposition.
pub fn glm_index_json(history: &str, query: &str, gamma_expl: f64) -> Result<String, String> {
    let history: Vec<Value> = serde_json::from_str(history).map_err(|e| e.to_string())?;
    let query: Vec<f64> = serde_json::from_str(query).map_err(|e| e.to_string())?;
    let d = query.len();
    let mut cfg = PolicyConfig::new(1, 1, d);
    cfg.gamma_expl = gamma_expl;
    let mut policy = GlmGtUcb::new(cfg).map_err(|e| e.to_string())?;
    let mut ledger = ActivationLedger::new();
    for (i, entry) in history.iter().enumerate() {
        let t = i as u32 + 1;
        let ctx: Vec<f64> = serde_json::from_value(entry["context"].clone()).map_err(|e| e.to_string())?;
        let nodes: Vec<u64> = serde_json::from_value(entry["nodes"].clone()).map_err(|e| e.to_string())?;
        let ctx = Context::new(ctx);
        let mut fb = Feedback::new(t);
        fb.per_influencer.insert(0, nodes.into_iter().collect());
        let reward = ledger.record(&fb).map_err(|e| e.to_string())?.reward;
        let view = RoundView::new(t, &ctx);
        policy
            .update(&view, &[0], &fb, &[reward as f64])
            .map_err(|e| e.to_string())?;
    }
    let parts = policy.index_parts(0, &query).map_err(|e| e.to_string())?;
    Ok(json!({
        "theta_hat": parts.theta_hat,
        "c_bonus": parts.c_bonus,
        "alpha": parts.alpha,
        "good_turing": parts.g,
        "beta": parts.beta,
        "bias": parts.bias,
        "index": parts.index,
    })
    .to_string())
}

/// `{lambda, gof}` for a JSON array of counts.
pub fn poisson_fit_json(samples: &str) -> Result<String, String> {
    let xs: Vec<u64> = serde_json::from_str(samples).map_err(|e| e.to_string())?;
    let fit = poisson_fit(&xs).map_err(|e| e.to_string())?;
    Ok(json!({"lambda": fit.lambda, "gof": fit.gof}).to_string())
}

#[wasm_bindgen]
pub fn run_demo_campaign(nodes: usize, rounds: usize, runs: usize, seed: u64) -> Result<String, JsValue> {
    campaign_json(nodes, rounds, runs, seed).map_err(js_err)
}

#[wasm_bindgen]
pub fn glm_index(history: &str, query: &str, gamma_expl: f64) -> Result<String, JsValue> {
    glm_index_json(history, query, gamma_expl).map_err(js_err)
}

#[wasm_bindgen]
pub fn fit_poisson(samples: &str) -> Result<String, JsValue> {
    poisson_fit_json(samples).map_err(js_err)
}
