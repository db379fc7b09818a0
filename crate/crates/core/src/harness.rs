//! Campaign orchestration.
//!
//! A campaign runs every configured policy for `R` independent runs of `T`
//! rounds. All randomness comes from streams keyed by
//! `(master_seed, policy, run, tag)`, so results do not depend on how the
//! (policy, run) pairs are scheduled across workers, and adding a policy
//! leaves the others' curves untouched. Within a run every policy faces the
//! same world and the same context sequence.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, ReplayEnv, ReplayLog, SimRng, SyntheticParams, SyntheticWorld};
use crate::error::{Error, Result};
use crate::ledger::{ActivationLedger, ArmId};
use crate::policy::{Fatigue, Policy, PolicyConfig, PolicyKind, RoundView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EnvironmentSpec {
    /// `influencers`, `dim` and `viral_arms` are overridden from the
    /// campaign's `K`, `d` and `L + 1`.
    Synthetic(SyntheticParams),
    Replay { log: PathBuf, contexts: PathBuf },
}

/// Per-policy overrides on top of the campaign defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    pub name: String,
    /// Distinct label when the same algorithm appears twice.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub gamma_expl: Option<f64>,
    #[serde(default)]
    pub gamma_reg: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub fatigue: Option<Fatigue>,
    #[serde(default)]
    pub boost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Name(String),
    Detailed(PolicyOverrides),
}

impl PolicySpec {
    fn overrides(&self) -> PolicyOverrides {
        match self {
            PolicySpec::Name(n) => PolicyOverrides {
                name: n.clone(),
                ..Default::default()
            },
            PolicySpec::Detailed(o) => o.clone(),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_gamma_reg() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub environment: EnvironmentSpec,
    pub policies: Vec<PolicySpec>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "R")]
    pub runs: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Defaults to `sqrt(1/2 · ln(sqrt(2TK/δ)))`.
    #[serde(default)]
    pub gamma_expl: Option<f64>,
    #[serde(default = "default_gamma_reg")]
    pub gamma_reg: f64,
    /// Adds `10/L` activations to GLM-GT-UCB's regression target.
    #[serde(default)]
    pub boost_enabled: bool,
}

/// A resolved policy entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub label: String,
    pub kind: PolicyKind,
    pub config: PolicyConfig,
}

impl CampaignConfig {
    /// Read a JSON config; relative replay paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: CampaignConfig = serde_json::from_str(&text)?;
        if let EnvironmentSpec::Replay { log, contexts } = &mut cfg.environment {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [log, contexts] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn effective_gamma_expl(&self) -> f64 {
        self.gamma_expl
            .unwrap_or_else(|| PolicyConfig::default_gamma_expl(self.horizon, self.k, self.delta))
    }

    pub fn policy_entries(&self) -> Result<Vec<PolicyEntry>> {
        let mut out: Vec<PolicyEntry> = Vec::new();
        for spec in &self.policies {
            let o = spec.overrides();
            let kind: PolicyKind = o.name.parse()?;
            let label = o.label.clone().unwrap_or_else(|| kind.as_str().to_string());
            if out.iter().any(|e| e.label == label) {
                return Err(Error::config(format!("duplicate policy label '{label}'")));
            }
            let boost = if self.boost_enabled && kind == PolicyKind::GlmGtUcb {
                10.0 / self.l as f64
            } else {
                0.0
            };
            let config = PolicyConfig {
                k: self.k,
                l: self.l,
                d: self.d,
                gamma_expl: o.gamma_expl.unwrap_or_else(|| self.effective_gamma_expl()),
                gamma_reg: o.gamma_reg.unwrap_or(self.gamma_reg),
                delta: o.delta.unwrap_or(self.delta),
                fatigue: o.fatigue.unwrap_or_default(),
                boost: o.boost.unwrap_or(boost),
            };
            config.validate()?;
            out.push(PolicyEntry {
                label,
                kind,
                config,
            });
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("R must be at least 1"));
        }
        if self.horizon < self.k {
            return Err(Error::config(format!(
                "T={} must be at least K={}",
                self.horizon, self.k
            )));
        }
        if self.policies.is_empty() {
            return Err(Error::config("no policies configured"));
        }
        self.policy_entries()?;
        if let EnvironmentSpec::Synthetic(p) = &self.environment {
            self.synthetic_params(p).validate()?;
        }
        Ok(())
    }

    /// `p` with the campaign-level sizes filled in.
    pub fn synthetic_params(&self, p: &SyntheticParams) -> SyntheticParams {
        SyntheticParams {
            influencers: self.k,
            dim: self.d,
            viral_arms: (self.l + 1).min(self.k),
            ..p.clone()
        }
    }
}

/// Output switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub trace: bool,
    pub dump_ledger: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            trace: false,
            dump_ledger: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub reward: u64,
    pub cum_reward: u64,
    pub distinct_activated: u64,
}

/// New activations one chosen arm produced in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmReward {
    pub round: u32,
    pub arm: ArmId,
    pub regime: String,
    pub reward: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy: String,
    pub run: usize,
    pub rounds: Vec<RoundRecord>,
    pub selections: Vec<Vec<ArmId>>,
    pub arm_rewards: Vec<ArmReward>,
    pub is_oracle: bool,
    /// One JSON line per round, filled with `--trace`.
    pub trace: Vec<String>,
    pub ledger: Option<ActivationLedger>,
}

impl RunResult {
    pub fn final_cum_reward(&self) -> u64 {
        self.rounds.last().map_or(0, |r| r.cum_reward)
    }
}

/// Pointwise mean and sample standard deviation of cumulative reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCurve {
    pub policy: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PolicyCurve {
    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub runs: Vec<RunResult>,
    pub curves: Vec<PolicyCurve>,
    pub universe: usize,
}

impl CampaignResult {
    pub fn curve(&self, policy: &str) -> Option<&PolicyCurve> {
        self.curves.iter().find(|c| c.policy == policy)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream `(master, policy, run, tag)`; stable across platforms.
pub fn stream_seed(master: u64, policy: &str, run: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(&master.to_le_bytes());
    feed(policy.as_bytes());
    feed(&[0xff]);
    feed(&run.to_le_bytes());
    feed(tag.as_bytes());
    splitmix64(h)
}

/// Environments for each run, shared by every policy of that run.
fn build_environments(cfg: &CampaignConfig) -> Result<Vec<Arc<dyn Environment>>> {
    match &cfg.environment {
        EnvironmentSpec::Synthetic(p) => {
            let params = cfg.synthetic_params(p);
            (0..cfg.runs)
                .map(|r| {
                    let seed = stream_seed(cfg.seed, "", r as u64, "world");
                    SyntheticWorld::generate(params.clone(), seed)
                        .map(|w| Arc::new(w) as Arc<dyn Environment>)
                })
                .collect()
        }
        EnvironmentSpec::Replay { log, contexts } => {
            let log = ReplayLog::read_jsonl(log, contexts)?;
            if log.dim() != cfg.d {
                return Err(Error::config(format!(
                    "replay contexts have dimension {}, config says d={}",
                    log.dim(),
                    cfg.d
                )));
            }
            let env: Arc<dyn Environment> = Arc::new(ReplayEnv::new(log, cfg.k)?);
            Ok(vec![env; cfg.runs])
        }
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    round: u32,
    chosen: &'a [ArmId],
    reward: u64,
    arms: Vec<crate::policy::ArmSnapshot>,
}

/// Run one policy for one run on `env`.
pub fn run_single(
    cfg: &CampaignConfig,
    entry: &PolicyEntry,
    run: usize,
    env: &dyn Environment,
    opts: RunOptions,
) -> Result<RunResult> {
    let label = entry.label.as_str();
    let mut policy: Box<dyn Policy> =
        entry
            .kind
            .build(&entry.config, stream_seed(cfg.seed, label, run as u64, "policy"))?;
    let mut ctx_rng = SimRng::seed_from_u64(stream_seed(cfg.seed, "", run as u64, "context"));
    let mut env_rng = SimRng::seed_from_u64(stream_seed(cfg.seed, label, run as u64, "env"));
    let oracle_base = stream_seed(cfg.seed, label, run as u64, "oracle");

    let mut ledger = ActivationLedger::new();
    let mut out = RunResult {
        policy: label.to_string(),
        run,
        rounds: Vec::with_capacity(cfg.horizon),
        selections: Vec::with_capacity(cfg.horizon),
        arm_rewards: Vec::new(),
        is_oracle: policy.needs_oracle(),
        trace: Vec::new(),
        ledger: None,
    };
    let mut cum = 0u64;

    for t in 1..=cfg.horizon as u32 {
        let draw = env.draw_context(&mut ctx_rng);
        let ranking = if policy.needs_oracle() {
            Some(env.true_ranking(&draw, &ledger, splitmix64(oracle_base ^ u64::from(t)))?)
        } else {
            None
        };
        let view = RoundView {
            t,
            context: &draw.context,
            oracle_ranking: ranking.as_deref(),
        };
        let chosen = policy.select(&view);
        if chosen.len() != cfg.l {
            return Err(Error::config(format!(
                "{label} selected {} arms, expected {}",
                chosen.len(),
                cfg.l
            )));
        }
        let fb = env.step(&chosen, &draw, t, &mut env_rng)?;
        let outcome = ledger.record(&fb)?;
        let share = outcome.reward as f64 / cfg.l as f64;
        policy.update(&view, &chosen, &fb, &vec![share; chosen.len()])?;

        cum += outcome.reward;
        out.rounds.push(RoundRecord {
            round: t,
            reward: outcome.reward,
            cum_reward: cum,
            distinct_activated: ledger.seen_total(),
        });
        for &arm in &chosen {
            out.arm_rewards.push(ArmReward {
                round: t,
                arm,
                regime: env.regime(&draw, arm),
                reward: outcome.new_per_influencer.get(&arm).copied().unwrap_or(0),
            });
        }
        if opts.trace {
            out.trace.push(serde_json::to_string(&TraceLine {
                round: t,
                chosen: &chosen,
                reward: outcome.reward,
                arms: policy.snapshot(),
            })?);
        }
        out.selections.push(chosen);
    }
    if opts.dump_ledger {
        out.ledger = Some(ledger);
    }
    Ok(out)
}

/// Run every (policy, run) pair and aggregate.
pub fn run_campaign(cfg: &CampaignConfig, opts: RunOptions) -> Result<CampaignResult> {
    cfg.validate()?;
    let entries = cfg.policy_entries()?;
    let envs = build_environments(cfg)?;
    let universe = envs.first().map_or(0, |e| e.universe_size());

    let jobs: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|p| (0..cfg.runs).map(move |r| (p, r)))
        .collect();
    let work = |&(p, r): &(usize, usize)| run_single(cfg, &entries[p], r, envs[r].as_ref(), opts);

    let runs: Vec<RunResult> = if opts.workers <= 1 {
        jobs.iter().map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(work).collect::<Result<_>>())?
    };

    let labels: Vec<String> = entries.iter().map(|e| e.label.clone()).collect();
    let curves = aggregate(&labels, &runs);
    Ok(CampaignResult {
        runs,
        curves,
        universe,
    })
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-policy pointwise statistics of the cumulative-reward curves, in
/// `labels` order.
pub fn aggregate(labels: &[String], runs: &[RunResult]) -> Vec<PolicyCurve> {
    labels
        .iter()
        .filter_map(|label| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| &r.policy == label).collect();
            let horizon = mine.iter().map(|r| r.rounds.len()).min()?;
            let (mean, std) = (0..horizon)
                .map(|t| {
                    let vals: Vec<f64> = mine.iter().map(|r| r.rounds[t].cum_reward as f64).collect();
                    mean_std(&vals)
                })
                .unzip();
            Some(PolicyCurve {
                policy: label.clone(),
                mean,
                std,
            })
        })
        .collect()
}

fn file_stem(policy: &str, run: usize) -> String {
    format!("{policy}__run{run:03}")
}

pub const RUN_HEADER: &str = "policy,run,round,reward,cum_reward,distinct_activated";
pub const AGGREGATE_HEADER: &str = "policy,round,mean_cum_reward,std_cum_reward";

pub fn write_run_csv(path: &Path, run: &RunResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RUN_HEADER}")?;
    for r in &run.rounds {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            run.policy, run.run, r.round, r.reward, r.cum_reward, r.distinct_activated
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `curves` restricted to rounds `from..` (1-based round numbers kept).
pub fn write_aggregate_csv(path: &Path, curves: &[PolicyCurve], from: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for c in curves {
        for t in from..c.mean.len() {
            writeln!(w, "{},{},{},{}", c.policy, t + 1, c.mean[t], c.std[t])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write `runs/*.csv`, `aggregate.csv` and the optional extras under `out`.
pub fn write_outputs(result: &CampaignResult, out: &Path, opts: RunOptions) -> Result<Vec<PathBuf>> {
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let mut written = Vec::new();
    for run in &result.runs {
        let p = runs_dir.join(format!("{}.csv", file_stem(&run.policy, run.run)));
        write_run_csv(&p, run)?;
        written.push(p);
    }
    let agg = out.join("aggregate.csv");
    write_aggregate_csv(&agg, &result.curves, 0)?;
    written.push(agg);

    let oracle: Vec<&RunResult> = result.runs.iter().filter(|r| r.is_oracle).collect();
    if !oracle.is_empty() {
        let p = out.join("oracle_rewards.csv");
        let mut w = BufWriter::new(File::create(&p)?);
        writeln!(w, "policy,run,round,influencer,regime,reward")?;
        for run in oracle {
            for a in &run.arm_rewards {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    run.policy, run.run, a.round, a.arm, a.regime, a.reward
                )?;
            }
        }
        w.flush()?;
        written.push(p);
    }

    if opts.trace {
        let dir = out.join("trace");
        fs::create_dir_all(&dir)?;
        for run in &result.runs {
            let p = dir.join(format!("{}.jsonl", file_stem(&run.policy, run.run)));
            let mut w = BufWriter::new(File::create(&p)?);
            for line in &run.trace {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            written.push(p);
        }
    }
    if opts.dump_ledger {
        let dir = out.join("ledgers");
        fs::create_dir_all(&dir)?;
        for run in &result.runs {
            if let Some(ledger) = &run.ledger {
                let p = dir.join(format!("{}.json", file_stem(&run.policy, run.run)));
                serde_json::to_writer(BufWriter::new(File::create(&p)?), ledger)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

/// Final cumulative reward per policy, averaged over runs.
pub fn final_means(result: &CampaignResult) -> BTreeMap<String, f64> {
    result
        .curves
        .iter()
        .map(|c| (c.policy.clone(), c.final_mean()))
        .collect()
}
