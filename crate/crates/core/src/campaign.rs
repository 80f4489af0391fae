//! Experiment campaigns built from many independent ecosystem runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigError, EcosystemConfig, ScriptedTransfer, WalletSpec};
use crate::costmodel::{harmonic, min_viable_price, simulated_cost_report, transfer_cost, CostError, SimulatedCost, TransferCost};
use crate::ecosystem::{count_corrupted, run, RunReport};
use crate::exec::Executor;
use crate::protocol::{Amount, Timestamp};

pub fn run_single(config: &EcosystemConfig) -> Result<RunReport, ConfigError> {
    Ok(run(config)?.report)
}

/// Centered three-point moving average; the window is truncated at both ends.
pub fn smooth3(values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub fn is_non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub validity: Timestamp,
    pub seed: u64,
    pub transfers: usize,
    pub corrupted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub validity: Timestamp,
    pub mean_corrupted: f64,
    pub min_corrupted: usize,
    pub max_corrupted: usize,
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub summary: Vec<SweepSummary>,
    /// The smoothed seed-mean curve never rises.
    pub non_increasing: bool,
}

/// Runs `base` once per (validity, seed) pair.
pub fn sweep_validity(
    base: &EcosystemConfig,
    validities: &[Timestamp],
    seeds: &[u64],
    exec: Executor,
) -> Result<SweepResult, ConfigError> {
    base.validate()?;
    let jobs: Vec<(Timestamp, u64)> = validities
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let points = exec
        .map(&jobs, |&(validity, seed)| {
            let cfg = EcosystemConfig { validity_length: validity, seed, ..base.clone() };
            let report = run_single(&cfg)?;
            Ok(SweepPoint { validity, seed, transfers: report.transfers.len(), corrupted: count_corrupted(&report) })
        })
        .into_iter()
        .collect::<Result<Vec<_>, ConfigError>>()?;

    let means: Vec<f64> = validities
        .iter()
        .map(|&v| {
            let at: Vec<usize> = points.iter().filter(|p| p.validity == v).map(|p| p.corrupted).collect();
            at.iter().sum::<usize>() as f64 / at.len().max(1) as f64
        })
        .collect();
    let smoothed = smooth3(&means);
    let summary = validities
        .iter()
        .zip(means.iter().zip(&smoothed))
        .map(|(&validity, (&mean, &smooth))| {
            let at = points.iter().filter(|p| p.validity == validity).map(|p| p.corrupted);
            SweepSummary {
                validity,
                mean_corrupted: mean,
                min_corrupted: at.clone().min().unwrap_or(0),
                max_corrupted: at.max().unwrap_or(0),
                smoothed: smooth,
            }
        })
        .collect();
    Ok(SweepResult { points, summary, non_increasing: is_non_increasing(&smoothed) })
}

/// One transfer from a funded sender, watched by `n` observers on three chains.
pub fn contest_scaling_config(base: &EcosystemConfig, n: usize, validity: Timestamp, seed: u64) -> EcosystemConfig {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.duration = 0;
    cfg.clients.count = 0;
    cfg.observers.count = n;
    cfg.wallets = vec![spec("sender", 100, false), spec("receiver", 0, false)];
    cfg.scripted_transfers = vec![scripted("sender", "receiver", 20, 1, 1 + validity, 0, None)];
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub runs: usize,
    pub mean: f64,
    pub std_err: f64,
    pub harmonic: f64,
    pub log2: f64,
    pub max: usize,
}

/// Confirmed contests per chain for a single transfer, averaged over `reps`
/// runs per observer count. Run `r` uses seed `seed_base + r`.
pub fn contest_scaling(
    base: &EcosystemConfig,
    n_values: &[usize],
    validity: Timestamp,
    reps: usize,
    seed_base: u64,
    exec: Executor,
) -> Result<Vec<ScalingPoint>, ConfigError> {
    let jobs: Vec<(usize, u64)> = n_values
        .iter()
        .flat_map(|&n| (0..reps as u64).map(move |r| (n, seed_base + r)))
        .collect();
    let samples = exec
        .map(&jobs, |&(n, seed)| {
            let report = run_single(&contest_scaling_config(base, n, validity, seed))?;
            let t = &report.transfers[0];
            let mean = t.contests.iter().sum::<usize>() as f64 / t.contests.len() as f64;
            Ok((n, mean, t.contests.iter().copied().max().unwrap_or(0)))
        })
        .into_iter()
        .collect::<Result<Vec<_>, ConfigError>>()?;

    Ok(n_values
        .iter()
        .map(|&n| {
            let xs: Vec<f64> = samples.iter().filter(|s| s.0 == n).map(|s| s.1).collect();
            let (mean, std_err) = mean_and_se(&xs);
            ScalingPoint {
                n,
                runs: xs.len(),
                mean,
                std_err,
                harmonic: harmonic(n),
                log2: (n as f64).log2(),
                max: samples.iter().filter(|s| s.0 == n).map(|s| s.2).max().unwrap_or(0),
            }
        })
        .collect())
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub n: usize,
    pub m: usize,
    pub reward: Amount,
    pub rounded_cost: bool,
    pub usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub costs: Vec<TransferCost>,
    pub thresholds: Vec<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated: Option<SimulatedCost>,
}

/// Analytical costs and price thresholds over the configured (m, n) grid.
pub fn cost_and_incentive(
    cfg: &EcosystemConfig,
    round_cost: bool,
    run: Option<&RunReport>,
) -> Result<CostReport, CostError> {
    let e = &cfg.experiment;
    let mut costs = Vec::new();
    let mut thresholds = Vec::new();
    for &m in &e.cost_m_values {
        for &n in &e.cost_n_values {
            costs.push(transfer_cost(m, n, &cfg.gas, &cfg.price));
            thresholds.push(Threshold {
                n,
                m,
                reward: cfg.reward,
                rounded_cost: round_cost,
                usd: min_viable_price(n, m, cfg.reward, &cfg.gas, &cfg.price, round_cost)?,
            });
        }
    }
    Ok(CostReport { costs, thresholds, simulated: run.map(|r| simulated_cost_report(r, &cfg.gas, &cfg.price)) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VetoVariant {
    /// 10 PBT adversary signs two overlapping 8 PBT proofs.
    DoubleSpend,
    /// A 9 PBT transfer settles first, leaving exactly the reward when the
    /// overlapping second proof is caught.
    RewardSized,
    /// A single honest transfer; the veto path never runs.
    NoConflict,
}

impl VetoVariant {
    pub const ALL: [VetoVariant; 3] = [VetoVariant::DoubleSpend, VetoVariant::RewardSized, VetoVariant::NoConflict];

    pub fn name(&self) -> &'static str {
        match self {
            VetoVariant::DoubleSpend => "double-spend",
            VetoVariant::RewardSized => "reward-sized",
            VetoVariant::NoConflict => "no-conflict",
        }
    }
}

pub const ADVERSARY: &str = "adversary";

pub fn veto_demo_config(base: &EcosystemConfig, variant: VetoVariant, seed: u64) -> EcosystemConfig {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.duration = 0;
    cfg.clients.count = 0;
    cfg.observers.count = 3;
    cfg.observers.watchdog = true;
    cfg.wallets = vec![spec(ADVERSARY, 10, false), spec("recipient-a", 0, false), spec("recipient-b", 0, false)];
    cfg.scripted_transfers = match variant {
        VetoVariant::DoubleSpend => vec![
            scripted(ADVERSARY, "recipient-a", 8, 1, 91, 0, None),
            scripted(ADVERSARY, "recipient-b", 8, 5, 95, 1, None),
        ],
        VetoVariant::RewardSized => vec![
            scripted(ADVERSARY, "recipient-a", 9, 1, 40, 0, None),
            scripted(ADVERSARY, "recipient-b", 8, 30, 150, 1, Some(60.0)),
        ],
        VetoVariant::NoConflict => vec![scripted(ADVERSARY, "recipient-a", 8, 1, 91, 0, None)],
    };
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VetoDemo {
    pub variant: VetoVariant,
    pub sender_balance: Vec<Amount>,
    pub burned: Vec<Amount>,
    pub veto_winners: Vec<Option<String>>,
    pub transfer_status: Vec<Vec<String>>,
    pub violations: Vec<String>,
    pub report: RunReport,
}

pub fn veto_demo(base: &EcosystemConfig, variant: VetoVariant, seed: u64) -> Result<VetoDemo, ConfigError> {
    let report = run_single(&veto_demo_config(base, variant, seed))?;
    let violations = match variant {
        VetoVariant::NoConflict => {
            let mut v = Vec::new();
            if !report.vetoes.is_empty() {
                v.push("veto raised without a conflict".to_string());
            }
            if !report.transfers.iter().all(|t| t.finalized_everywhere()) {
                v.push("honest transfer did not finalize everywhere".to_string());
            }
            v
        }
        VetoVariant::DoubleSpend => double_spend_violations(&report, ADVERSARY, 0),
        VetoVariant::RewardSized => double_spend_violations(&report, ADVERSARY, 1),
    };
    Ok(VetoDemo {
        variant,
        sender_balance: report.chains.iter().map(|c| c.balances[ADVERSARY]).collect(),
        burned: report.chains.iter().map(|c| c.burned).collect(),
        veto_winners: report
            .vetoes
            .first()
            .map(|v| v.winners.clone())
            .unwrap_or_else(|| vec![None; report.chain_count]),
        transfer_status: report.transfers.iter().map(|t| t.status.clone()).collect(),
        violations,
        report,
    })
}

/// A randomized double-spend: two overlapping proofs from one sender,
/// claimed on different chains, watched by one to four watchdogs.
pub fn double_spend_scenario(seed: u64) -> EcosystemConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d0b1e);
    let m = rng.gen_range(2..=4usize);
    let balance: Amount = rng.gen_range(10..=100);
    let amount_a = rng.gen_range(2..=balance);
    let amount_b = rng.gen_range(2..=balance);
    let v_a: Timestamp = rng.gen_range(90..=180);
    let v_b: Timestamp = rng.gen_range(90..=180);
    let t0_b = 1 + rng.gen_range(0..=20);
    let chain_a = rng.gen_range(0..m);
    let chain_b = (chain_a + rng.gen_range(1..m)) % m;

    let mut cfg = EcosystemConfig { chain_count: m, seed, duration: 0, ..EcosystemConfig::default() };
    cfg.clients.count = 0;
    cfg.observers.count = rng.gen_range(1..=4);
    cfg.observers.watchdog = true;
    cfg.wallets = vec![spec(ADVERSARY, balance, false), spec("recipient-a", 0, false), spec("recipient-b", 0, false)];
    cfg.scripted_transfers = vec![
        scripted(ADVERSARY, "recipient-a", amount_a, 1, 1 + v_a, chain_a as u32, None),
        scripted(ADVERSARY, "recipient-b", amount_b, t0_b, t0_b + v_b, chain_b as u32, None),
    ];
    cfg
}

/// Veto-path guarantees: sender emptied everywhere, no conflicting transfer
/// finalized, one identical veto winner per chain, and supply conserved.
///
/// The first `settled_before` transfers of the sender legitimately finalized
/// before the conflicting proof existed.
pub fn double_spend_violations(report: &RunReport, sender: &str, settled_before: usize) -> Vec<String> {
    let mut out = Vec::new();
    for c in &report.chains {
        if c.balances[sender] != 0 {
            out.push(format!("chain {}: sender balance {}", c.chain_id, c.balances[sender]));
        }
        if !c.supply.conserved {
            out.push(format!("chain {}: supply not conserved", c.chain_id));
        }
    }
    for (i, t) in report.transfers.iter().filter(|t| t.sender == sender).enumerate() {
        if i < settled_before {
            if !t.finalized_everywhere() {
                out.push(format!("transfer {} should have settled before the conflict", &t.alpha[..16]));
            }
        } else if t.finalized_anywhere() {
            out.push(format!("conflicting transfer {} finalized", &t.alpha[..16]));
        }
    }
    if report.vetoes.len() != 1 {
        out.push(format!("expected one veto contest, found {}", report.vetoes.len()));
    }
    for v in &report.vetoes {
        if v.status.iter().any(|s| s != "finalized") {
            out.push(format!("veto not finalized on every chain: {:?}", v.status));
        }
        let first = &v.winners[0];
        if first.is_none() || v.winners.iter().any(|w| w != first) {
            out.push(format!("veto winners differ across chains: {:?}", v.winners));
        }
    }
    out
}

fn spec(name: &str, balance: Amount, observer: bool) -> WalletSpec {
    WalletSpec { name: name.into(), balance, key_seed: None, observer }
}

fn scripted(
    sender: &str,
    recipient: &str,
    amount: Amount,
    t0: Timestamp,
    t1: Timestamp,
    claim_chain: u32,
    submit_at: Option<f64>,
) -> ScriptedTransfer {
    ScriptedTransfer {
        sender: sender.into(),
        recipient: recipient.into(),
        amount,
        t0,
        t1,
        claim_chain,
        submit_at,
        finalize_at: None,
    }
}
