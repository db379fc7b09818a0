use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ctxim::analysis::{
    curves_from_runs, export_plot_data, fit_cells, read_oracle_rewards, read_runs, reward_cells,
    write_fits_csv, MIN_FIT_SAMPLES,
};
use ctxim::env::{loggen_synthesize, SyntheticWorld};
use ctxim::harness::{write_aggregate_csv, write_outputs, EnvironmentSpec};
use ctxim::{run_campaign, CampaignConfig, Error, RunOptions};

#[derive(Parser)]
#[command(name = "ctxim", version, about = "Contextual bandits for influence maximization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotFormat {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write per-run and aggregate CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Per-round policy snapshots as JSONL.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        dump_ledger: bool,
    },
    /// Write a replay log sampled from a synthetic world.
    GenerateLog {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        contexts: usize,
        #[arg(long, default_value_t = 5000)]
        records: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summaries and Poisson fits of a finished campaign.
    Analyze {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cumulative-reward curves for plotting.
    PlotData {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: PlotFormat,
    },
}

fn load_config(path: &Path) -> Result<CampaignConfig, ExitCode> {
    if !path.is_file() {
        eprintln!("error: config file {} not found", path.display());
        return Err(ExitCode::from(2));
    }
    CampaignConfig::from_path(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn execute(cmd: Command) -> Result<(), ExitCode> {
    let fail = |e: Error| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    };
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            workers,
            trace,
            dump_ledger,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let opts = RunOptions {
                workers: workers.max(1),
                trace,
                dump_ledger,
            };
            let res = run_campaign(&cfg, opts).map_err(fail)?;
            write_outputs(&res, &out, opts).map_err(fail)?;
            for c in &res.curves {
                println!("{:<16} final mean cumulative reward {:.1}", c.policy, c.final_mean());
            }
        }
        Command::GenerateLog {
            config,
            out,
            contexts,
            records,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let EnvironmentSpec::Synthetic(p) = &cfg.environment else {
                return Err(fail(Error::NotSynthetic));
            };
            let seed = seed.unwrap_or(cfg.seed);
            let world = SyntheticWorld::generate(cfg.synthetic_params(p), seed).map_err(fail)?;
            let log = loggen_synthesize(&world, contexts, records, seed);
            std::fs::create_dir_all(&out).map_err(|e| fail(e.into()))?;
            log.write_jsonl(&out.join("records.jsonl"), &out.join("contexts.jsonl"))
                .map_err(fail)?;
            println!("wrote {records} records over {contexts} contexts to {}", out.display());
        }
        Command::Analyze { runs, out } => {
            let all = read_runs(&runs).map_err(fail)?;
            std::fs::create_dir_all(&out).map_err(|e| fail(e.into()))?;
            let curves = curves_from_runs(&all);
            write_aggregate_csv(&out.join("aggregate.csv"), &curves, 0).map_err(fail)?;
            for c in &curves {
                let t = c.mean.len().saturating_sub(1);
                println!("{:<16} mean {:.1} std {:.1}", c.policy, c.mean[t], c.std[t]);
            }
            let oracle = runs.join("oracle_rewards.csv");
            if oracle.is_file() {
                let rewards = read_oracle_rewards(&oracle).map_err(fail)?;
                let fits = fit_cells(&reward_cells(&rewards));
                let skipped = fits.iter().filter(|f| f.fit.is_none()).count();
                if skipped > 0 {
                    eprintln!(
                        "warning: {skipped} cells have fewer than {MIN_FIT_SAMPLES} samples and were not fitted"
                    );
                }
                write_fits_csv(&out.join("poisson_fits.csv"), &fits).map_err(fail)?;
            }
        }
        Command::PlotData { runs, out, format } => {
            let all = read_runs(&runs).map_err(fail)?;
            let files = export_plot_data(&curves_from_runs(&all), &out, matches!(format, PlotFormat::Svg))
                .map_err(fail)?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
