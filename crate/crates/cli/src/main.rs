//! `dextt`: runs simulator campaigns and writes their reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dextt_core::campaign::{
    contest_scaling, cost_and_incentive, run_single, sweep_validity, veto_demo, VetoVariant,
};
use dextt_core::config::{ConfigError, EcosystemConfig};
use dextt_core::costmodel::CostError;
use dextt_core::ecosystem::{self, LEDGER_HEADER};
use dextt_core::exec::Executor;
use dextt_core::report::{to_sorted_json, write_csv, write_json};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Campaign {
    Run,
    SweepValidity,
    ContestScaling,
    CostReport,
    Incentive,
    VetoDemo,
}

impl Campaign {
    fn name(self) -> &'static str {
        match self {
            Campaign::Run => "run",
            Campaign::SweepValidity => "sweep-validity",
            Campaign::ContestScaling => "contest-scaling",
            Campaign::CostReport => "cost-report",
            Campaign::Incentive => "incentive",
            Campaign::VetoDemo => "veto-demo",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dextt", version, about = "Cross-chain token transfer simulator")]
struct Args {
    #[arg(long, value_enum, default_value = "run")]
    campaign: Campaign,
    /// Ecosystem configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; each campaign writes into its own subdirectory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seeds, comma separated; `a-b` is an inclusive range.
    #[arg(long)]
    seeds: Option<String>,
    /// Runs per observer count for contest-scaling.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Block interval jitter, overriding the config.
    #[arg(long)]
    jitter: Option<f64>,
    /// Round the observer cost to whole cents before computing thresholds.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    round_observer_cost: bool,
    /// Run the independent simulations one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list {text:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Outcome of a campaign: the failures of its built-in checks.
struct Outcome {
    failures: Vec<String>,
    files: Vec<PathBuf>,
}

fn file(dir: &Path, campaign: Campaign, stem: impl std::fmt::Display, ext: &str) -> PathBuf {
    dir.join(format!("{}-{stem}.{ext}", campaign.name()))
}

fn execute(args: &Args) -> Result<Outcome, CliError> {
    let mut cfg = match &args.config {
        Some(path) => EcosystemConfig::from_path(path)?,
        None => EcosystemConfig::default(),
    };
    if let Some(j) = args.jitter {
        cfg.jitter = j;
        cfg.validate()?;
    }
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let exec = if args.sequential { Executor::Sequential } else { Executor::default() };
    let dir = args.out.join(args.campaign.name());
    std::fs::create_dir_all(&dir)?;
    let seeds = match &args.seeds {
        Some(text) => parse_seeds(text)?,
        None if args.campaign == Campaign::SweepValidity => (1..=10).collect(),
        None => vec![cfg.seed],
    };
    let c = args.campaign;
    let mut out = Outcome { failures: Vec::new(), files: Vec::new() };

    match c {
        Campaign::Run => {
            let configs: Vec<EcosystemConfig> = seeds.iter().map(|&seed| EcosystemConfig { seed, ..cfg.clone() }).collect();
            let runs = exec.map(&configs, ecosystem::run);
            for (seed, result) in seeds.iter().zip(runs) {
                let outcome = result?;
                let report = &outcome.report;
                if !report.all_conserved() {
                    out.failures.push(format!("seed {seed}: supply not conserved"));
                }
                if !report.inconsistencies.is_empty() {
                    out.failures.push(format!("seed {seed}: {} inconsistent wallets", report.inconsistencies.len()));
                }
                let paths = [
                    file(&dir, c, seed, "json"),
                    file(&dir, c, seed, "csv"),
                    file(&dir, c, format_args!("{seed}.snapshot"), "json"),
                ];
                write_json(&paths[0], report)?;
                write_csv(&paths[1], &LEDGER_HEADER, &report.ledger_rows())?;
                write_json(&paths[2], &report.balance_snapshot())?;
                out.files.extend(paths);
                if cfg.block_log {
                    let path = file(&dir, c, format_args!("{seed}.blocks"), "jsonl");
                    let lines: Vec<String> = outcome
                        .block_log
                        .iter()
                        .map(|l| serde_json::to_string(l).expect("block log serializes"))
                        .collect();
                    std::fs::write(&path, lines.join("\n") + "\n")?;
                    out.files.push(path);
                }
            }
        }
        Campaign::SweepValidity => {
            let sweep = sweep_validity(&cfg, &cfg.experiment.validity_values, &seeds, exec)?;
            for &seed in &seeds {
                let rows: Vec<_> = sweep
                    .points
                    .iter()
                    .filter(|p| p.seed == seed)
                    .map(|p| (p.validity, p.corrupted, p.transfers))
                    .collect();
                let path = file(&dir, c, seed, "csv");
                write_csv(&path, &["validity", "corrupted", "transfers"], &rows)?;
                out.files.push(path);
            }
            let rows: Vec<_> = sweep
                .summary
                .iter()
                .map(|s| (s.validity, s.mean_corrupted, s.min_corrupted, s.max_corrupted, s.smoothed))
                .collect();
            let csv = file(&dir, c, "summary", "csv");
            write_csv(&csv, &["validity", "mean_corrupted", "min_corrupted", "max_corrupted", "smoothed"], &rows)?;
            let json = file(&dir, c, "summary", "json");
            write_json(&json, &sweep)?;
            out.files.extend([csv, json]);
        }
        Campaign::ContestScaling => {
            let e = &cfg.experiment;
            let points = contest_scaling(&cfg, &e.n_values, e.scaling_validity, args.reps, seeds[0], exec)?;
            let rows: Vec<_> = points.iter().map(|p| (p.n, p.runs, p.mean, p.std_err, p.harmonic, p.log2)).collect();
            let csv = file(&dir, c, seeds[0], "csv");
            write_csv(&csv, &["n", "runs", "mean_contests_per_chain", "std_err", "harmonic", "log2"], &rows)?;
            let json = file(&dir, c, seeds[0], "json");
            write_json(&json, &points)?;
            out.files.extend([csv, json]);
        }
        Campaign::CostReport | Campaign::Incentive => {
            for &seed in &seeds {
                let report = if c == Campaign::CostReport {
                    let run_cfg = EcosystemConfig { seed, ..cfg.clone() };
                    Some(run_single(&run_cfg)?)
                } else {
                    None
                };
                let costs = cost_and_incentive(&cfg, args.round_observer_cost, report.as_ref())?;
                let path = file(&dir, c, seed, "json");
                write_json(&path, &costs)?;
                out.files.push(path);
                for cost in &costs.costs {
                    println!(
                        "m={:<3} n={:<5} receiver {:>8.1} kGas {:>6.2} USD   observer {:>8.1} kGas {:>6.2} USD",
                        cost.m, cost.n, cost.receiver_kgas, cost.receiver_usd, cost.observer_kgas, cost.observer_usd
                    );
                }
                for t in &costs.thresholds {
                    println!("m={:<3} n={:<5} minimum token price {:>8.2} USD", t.m, t.n, t.usd);
                }
            }
        }
        Campaign::VetoDemo => {
            for &seed in &seeds {
                let mut demos = Vec::new();
                for variant in VetoVariant::ALL {
                    let demo = veto_demo(&cfg, variant, seed)?;
                    out.failures.extend(demo.violations.iter().map(|v| format!("seed {seed} {}: {v}", variant.name())));
                    demos.push(demo);
                }
                let path = file(&dir, c, seed, "json");
                write_json(&path, &demos)?;
                out.files.push(path);
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(outcome) if outcome.failures.is_empty() => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            let summary = json!({
                "campaign": args.campaign.name(),
                "status": "failed",
                "failures": outcome.failures,
            });
            let path = args.out.join(args.campaign.name()).join("failures.json");
            if let Err(e) = write_json(&path, &summary) {
                eprintln!("could not write {}: {e}", path.display());
            }
            print!("{}", to_sorted_json(&summary));
            ExitCode::from(1)
        }
        Err(e) => {
            let summary = json!({ "campaign": args.campaign.name(), "status": "error", "error": e.to_string() });
            eprint!("{}", to_sorted_json(&summary));
            ExitCode::from(2)
        }
    }
}
