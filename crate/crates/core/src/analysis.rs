//! Post-hoc analysis: Poisson fits of oracle rewards, empirical regret on a
//! stationary log-linear bandit, and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::env::{Context, LogLinearBandit, SimRng};
use crate::error::{Error, Result};
use crate::harness::{aggregate, write_aggregate_csv, ArmReward, PolicyCurve, RoundRecord, RunResult, RUN_HEADER};
use crate::ledger::{ArmId, Feedback};
use crate::policy::{Policy, RoundView};

/// Cells with fewer samples are not fitted.
pub const MIN_FIT_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    pub lambda: f64,
    /// Largest gap between the empirical and fitted CDF over `0..=max`.
    pub gof: f64,
}

pub fn poisson_fit(samples: &[u64]) -> Result<PoissonFit> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let lambda = samples.iter().map(|&v| v as f64).sum::<f64>() / n;
    let max = *samples.iter().max().expect("non-empty");
    if lambda == 0.0 {
        // point mass at zero, matched exactly
        return Ok(PoissonFit { lambda, gof: 0.0 });
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::config(e.to_string()))?;
    let mut hist = vec![0u64; max as usize + 1];
    for &v in samples {
        hist[v as usize] += 1;
    }
    let mut cum = 0u64;
    let mut gof = 0.0f64;
    for (x, &h) in hist.iter().enumerate() {
        cum += h;
        gof = gof.max((cum as f64 / n - dist.cdf(x as u64)).abs());
    }
    Ok(PoissonFit { lambda, gof })
}

/// Per-round rewards of one influencer in one context regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardSample {
    pub influencer: ArmId,
    pub context: String,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFit {
    pub influencer: ArmId,
    pub context: String,
    pub samples: usize,
    /// `None` when the cell has fewer than [`MIN_FIT_SAMPLES`] samples.
    pub fit: Option<PoissonFit>,
}

/// Group per-arm rewards into (influencer, regime) cells.
pub fn reward_cells<'a>(rewards: impl IntoIterator<Item = &'a ArmReward>) -> Vec<RewardSample> {
    let mut cells: BTreeMap<(ArmId, String), Vec<u64>> = BTreeMap::new();
    for r in rewards {
        cells.entry((r.arm, r.regime.clone())).or_default().push(r.reward);
    }
    cells
        .into_iter()
        .map(|((influencer, context), values)| RewardSample {
            influencer,
            context,
            values,
        })
        .collect()
}

pub fn fit_cells(cells: &[RewardSample]) -> Vec<CellFit> {
    cells
        .iter()
        .map(|c| CellFit {
            influencer: c.influencer,
            context: c.context.clone(),
            samples: c.values.len(),
            fit: if c.values.len() < MIN_FIT_SAMPLES {
                None
            } else {
                poisson_fit(&c.values).ok()
            },
        })
        .collect()
}

/// One round of a single-arm stationary bandit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretStep {
    pub context: Vec<f64>,
    pub arm: ArmId,
    pub log_reward: f64,
}

/// Cumulative regret `Σ max_k <θ_k, Y_s> - Σ r_s` with log-scale rewards.
pub fn empirical_regret(trace: &[RegretStep], thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = thetas
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::MissingGroundTruth("no arm parameters".into()))?;
    let mut cum = 0.0;
    let mut out = Vec::with_capacity(trace.len());
    for step in trace {
        if step.context.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: step.context.len(),
            });
        }
        if step.arm >= thetas.len() {
            return Err(Error::MissingGroundTruth(format!("arm {}", step.arm)));
        }
        let best = thetas
            .iter()
            .map(|t| crate::linalg::dot(t, &step.context))
            .fold(f64::NEG_INFINITY, f64::max);
        cum += best - step.log_reward;
        out.push(cum);
    }
    Ok(out)
}

/// Drive a single-play policy on `bandit` for `horizon` rounds. The policy
/// sees the natural-scale reward `exp(log r)`.
pub fn run_stationary(
    bandit: &LogLinearBandit,
    policy: &mut dyn Policy,
    horizon: u32,
    seed: u64,
) -> Result<Vec<RegretStep>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let ctx: Context = bandit.draw_context(&mut rng);
        let view = RoundView::new(t, &ctx);
        let chosen = policy.select(&view);
        let &[arm] = chosen.as_slice() else {
            return Err(Error::config("stationary runs need a single play per round"));
        };
        let log_reward = bandit.pull_log(arm, &ctx, &mut rng);
        policy.update(&view, &chosen, &Feedback::new(t), &[log_reward.exp()])?;
        out.push(RegretStep {
            context: ctx.vector,
            arm,
            log_reward,
        });
    }
    Ok(out)
}

/// Mean per-round regret over rounds `from..=to` (1-based).
pub fn window_regret(cum: &[f64], from: usize, to: usize) -> f64 {
    let before = if from > 1 { cum[from - 2] } else { 0.0 };
    (cum[to - 1] - before) / (to + 1 - from) as f64
}

/// Read `policy__runNNN.csv` files from `dir` or `dir/runs`.
pub fn read_runs(dir: &Path) -> Result<Vec<RunResult>> {
    let dir = if dir.join("runs").is_dir() {
        dir.join("runs")
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut runs = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == RUN_HEADER => {}
            _ => continue,
        }
        let mut run: Option<RunResult> = None;
        for (i, line) in lines {
            let bad = |msg: &str| Error::Parse {
                path: path.clone(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| bad(&e.to_string()));
            let r = run.get_or_insert_with(|| RunResult {
                policy: f[0].to_string(),
                run: 0,
                rounds: Vec::new(),
                selections: Vec::new(),
                arm_rewards: Vec::new(),
                is_oracle: false,
                trace: Vec::new(),
                ledger: None,
            });
            r.run = num(f[1])? as usize;
            r.rounds.push(RoundRecord {
                round: num(f[2])? as u32,
                reward: num(f[3])?,
                cum_reward: num(f[4])?,
                distinct_activated: num(f[5])?,
            });
        }
        runs.extend(run);
    }
    if runs.is_empty() {
        return Err(Error::config(format!("no run CSVs under {}", dir.display())));
    }
    Ok(runs)
}

/// Policy labels in order of first appearance.
pub fn policy_labels(runs: &[RunResult]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in runs {
        if !labels.contains(&r.policy) {
            labels.push(r.policy.clone());
        }
    }
    labels
}

/// Curves from a runs directory.
pub fn curves_from_runs(runs: &[RunResult]) -> Vec<PolicyCurve> {
    aggregate(&policy_labels(runs), runs)
}

/// Read an `oracle_rewards.csv` back into per-arm rewards.
pub fn read_oracle_rewards(path: &Path) -> Result<Vec<ArmReward>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields".into()));
        }
        out.push(ArmReward {
            round: f[2].parse().map_err(|e| bad(format!("{e}")))?,
            arm: f[3].parse().map_err(|e| bad(format!("{e}")))?,
            regime: f[4].to_string(),
            reward: f[5].parse().map_err(|e| bad(format!("{e}")))?,
        });
    }
    Ok(out)
}

pub fn write_fits_csv(path: &Path, fits: &[CellFit]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "influencer,context,samples,lambda,gof")?;
    for c in fits {
        match c.fit {
            Some(f) => writeln!(w, "{},{},{},{},{}", c.influencer, c.context, c.samples, f.lambda, f.gof)?,
            None => writeln!(w, "{},{},{},,", c.influencer, c.context, c.samples)?,
        }
    }
    w.flush()?;
    Ok(())
}

pub const TAIL_ROUNDS: usize = 50;

/// Write `curves.csv`, `curves_tail50.csv` and optionally `curves.svg`.
pub fn export_plot_data(curves: &[PolicyCurve], out: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let full = out.join("curves.csv");
    write_aggregate_csv(&full, curves, 0)?;
    let tail = out.join("curves_tail50.csv");
    let horizon = curves.iter().map(|c| c.mean.len()).max().unwrap_or(0);
    write_aggregate_csv(&tail, curves, horizon.saturating_sub(TAIL_ROUNDS))?;
    let mut written = vec![full, tail];
    if svg {
        let p = out.join("curves.svg");
        fs::write(&p, render_svg(curves))?;
        written.push(p);
    }
    Ok(written)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line chart of mean cumulative reward with a ±1 std band per policy.
pub fn render_svg(curves: &[PolicyCurve]) -> String {
    let (w, h, m) = (800.0, 500.0, 60.0);
    let horizon = curves.iter().map(|c| c.mean.len()).max().unwrap_or(0).max(1);
    let ymax = curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).map(|(a, b)| a + b))
        .fold(1.0f64, f64::max);
    let sx = |t: usize| m + (w - 2.0 * m) * t as f64 / horizon.max(2).saturating_sub(1) as f64;
    let sy = |v: f64| h - m - (h - 2.0 * m) * v / ymax;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">round</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{}" font-size="12">{ymax:.0}</text>"#,
        m - 8.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = (0..c.mean.len()).map(|t| (sx(t), sy(c.mean[t] + c.std[t])));
        let lower = (0..c.mean.len()).rev().map(|t| (sx(t), sy((c.mean[t] - c.std[t]).max(0.0))));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let line: Vec<String> = (0..c.mean.len())
            .map(|t| format!("{:.2},{:.2}", sx(t), sy(c.mean[t])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            m + 10.0,
            m + 16.0 * (i + 1) as f64,
            xml_escape(&c.policy)
        );
    }
    s.push_str("</svg>\n");
    s
}
