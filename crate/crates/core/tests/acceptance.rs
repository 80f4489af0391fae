//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dextt_core::campaign::{
    contest_scaling, cost_and_incentive, double_spend_scenario, double_spend_violations, run_single, sweep_validity,
    veto_demo, VetoVariant, ADVERSARY,
};
use dextt_core::config::EcosystemConfig;
use dextt_core::costmodel::{min_viable_price, transfer_cost, GasTable, PriceModel};
use dextt_core::ecosystem::{self, LEDGER_HEADER};
use dextt_core::exec::Executor;
use dextt_core::report::{write_csv, write_json};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn worked_example() -> Verdict {
    let start = Instant::now();
    let report = run_single(&EcosystemConfig::worked_example()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut bad = Vec::new();
    for c in &report.chains {
        let got = (c.balances["W_s"], c.balances["W_d"], c.balances["W_w"]);
        if got != (60, 19, 1) || c.balances["W_u"] != 0 || c.balances["W_v"] != 0 {
            bad.push(format!("chain {}: {got:?}", c.chain_id));
        }
    }
    let ok = bad.is_empty() && report.chains.len() == 3 && took < Duration::from_secs(1);
    check(ok, format!("W_s, W_d, W_w = (60, 19, 1) on {} chains {bad:?} in {}", report.chains.len(), secs(took)))
}

fn validity_sweep() -> Verdict {
    let start = Instant::now();
    let base = EcosystemConfig::default();
    let mut validities: Vec<u64> = (10..=70).step_by(5).chain([13, 52]).collect();
    validities.sort();
    let seeds: Vec<u64> = (1..=10).collect();
    let sweep = sweep_validity(&base, &validities, &seeds, Executor::default()).map_err(|e| e.to_string())?;
    let total = |pred: &dyn Fn(u64) -> bool| -> usize {
        sweep.points.iter().filter(|p| pred(p.validity)).map(|p| p.corrupted).sum()
    };
    let long = total(&|v| v >= 52);
    let short = total(&|v| v <= 13);
    let curve: Vec<String> = sweep.summary.iter().map(|s| format!("{}:{:.1}", s.validity, s.mean_corrupted)).collect();
    check(
        long == 0 && short >= 1 && sweep.non_increasing,
        format!(
            "corrupted at >= 52 s: {long}, at <= 13 s: {short}, smoothed non-increasing: {}; mean per run [{}] in {}",
            sweep.non_increasing,
            curve.join(" "),
            secs(start.elapsed())
        ),
    )
}

fn contest_scaling_bounds() -> Verdict {
    let start = Instant::now();
    let cfg = EcosystemConfig::default();
    let points = contest_scaling(&cfg, &[4, 16, 64], cfg.experiment.scaling_validity, 200, cfg.seed, Executor::default())
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut ok = took < Duration::from_secs(60);
    let mut parts = Vec::new();
    for p in &points {
        let near_oracle = (p.mean - p.harmonic).abs() <= 3.0 * p.std_err;
        let under_log2 = p.mean <= p.log2 + 3.0 * p.std_err;
        ok &= near_oracle && under_log2 && p.runs >= 200;
        parts.push(format!(
            "n={} mean {:.4} se {:.4} H_n {:.4} [{}] log2n+3se {:.4} [{}]",
            p.n,
            p.mean,
            p.std_err,
            p.harmonic,
            if near_oracle { "ok" } else { "off" },
            p.log2 + 3.0 * p.std_err,
            if under_log2 { "ok" } else { "exceeded" },
        ));
    }
    let mut detail = format!("{} in {}", parts.join("; "), secs(took));
    if points.iter().any(|p| p.harmonic > p.log2) {
        // H_4 = 2.083 > log2 4 = 2: the expected count itself sits above the
        // log2 bound, so that sub-check holds only when noise pulls the mean down.
        detail.push_str("; note: H_n > log2 n for n <= 4");
    }
    check(ok, detail)
}

fn costs() -> Verdict {
    let c = transfer_cost(10, 10, &GasTable::default(), &PriceModel::default());
    let ok = (c.receiver_usd - 0.59).abs() <= 0.005 && (c.observer_usd - 0.94).abs() <= 0.005;
    check(ok, format!("receiver {:.5} USD, observer {:.5} USD", c.receiver_usd, c.observer_usd))
}

fn thresholds() -> Verdict {
    let (gas, price) = (GasTable::default(), PriceModel::default());
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, want) in [(10, 2.83), (100, 14.15), (1000, 94.32)] {
        let got = min_viable_price(n, 10, 1, &gas, &price, true).map_err(|e| e.to_string())?;
        ok &= (got - want).abs() <= 0.01;
        parts.push(format!("n={n}: {got:.4} USD"));
    }
    check(ok, parts.join(", "))
}

fn double_spends() -> Verdict {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=50).collect();
    let results = Executor::default().map(&seeds, |&seed| {
        let cfg = double_spend_scenario(seed);
        run_single(&cfg).map(|r| (cfg.chain_count, double_spend_violations(&r, ADVERSARY, 0)))
    });
    let mut violations = Vec::new();
    let mut chains = BTreeMap::new();
    for (seed, r) in seeds.iter().zip(results) {
        let (m, v) = r.map_err(|e| e.to_string())?;
        *chains.entry(m).or_insert(0) += 1;
        violations.extend(v.into_iter().map(|v| format!("seed {seed}: {v}")));
    }
    let took = start.elapsed();
    check(
        violations.is_empty() && took < Duration::from_secs(30),
        format!("50 scenarios (chain counts {chains:?}), violations {violations:?} in {}", secs(took)),
    )
}

/// Writes a fixed set of campaign reports under `dir`; returns file hashes.
fn write_campaigns(dir: &Path, exec: Executor) -> Result<BTreeMap<String, String>, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let base = EcosystemConfig::default();
    let mut files: Vec<PathBuf> = Vec::new();

    let run = ecosystem::run(&EcosystemConfig { seed: 5, ..base.clone() }).map_err(|e| err(&e))?;
    let p = [dir.join("run-5.json"), dir.join("run-5.csv"), dir.join("run-5.snapshot.json")];
    write_json(&p[0], &run.report).map_err(|e| err(&e))?;
    write_csv(&p[1], &LEDGER_HEADER, &run.report.ledger_rows()).map_err(|e| err(&e))?;
    write_json(&p[2], &run.report.balance_snapshot()).map_err(|e| err(&e))?;
    files.extend(p);

    let short = EcosystemConfig { duration: 300, ..base.clone() };
    let sweep = sweep_validity(&short, &[15, 30, 60], &[1, 2], exec).map_err(|e| err(&e))?;
    files.push(dir.join("sweep.json"));
    write_json(files.last().unwrap(), &sweep).map_err(|e| err(&e))?;

    let scaling = contest_scaling(&base, &[4, 16], 65, 20, 0, exec).map_err(|e| err(&e))?;
    files.push(dir.join("scaling.json"));
    write_json(files.last().unwrap(), &scaling).map_err(|e| err(&e))?;

    let costs = cost_and_incentive(&base, true, Some(&run.report)).map_err(|e| err(&e))?;
    files.push(dir.join("cost.json"));
    write_json(files.last().unwrap(), &costs).map_err(|e| err(&e))?;

    let demos: Vec<_> = VetoVariant::ALL
        .iter()
        .map(|&v| veto_demo(&base, v, 3))
        .collect::<Result<_, _>>()
        .map_err(|e| err(&e))?;
    files.push(dir.join("veto.json"));
    write_json(files.last().unwrap(), &demos).map_err(|e| err(&e))?;

    let mut hashes = BTreeMap::new();
    for f in files {
        let bytes = std::fs::read(&f).map_err(|e| err(&e))?;
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        hashes.insert(name, hex::encode(Sha256::digest(&bytes)));
    }
    Ok(hashes)
}

fn determinism() -> Verdict {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    let a = write_campaigns(&root.join("a"), Executor::Sequential)?;
    let b = write_campaigns(&root.join("b"), Executor::default())?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    check(
        differing.is_empty() && a.len() == b.len(),
        format!("{} report files hashed twice (sequential, then default executor), differing {differing:?}", a.len()),
    )
}

fn order_independence() -> Verdict {
    let mut bad = Vec::new();
    let mut txs = 0;
    for seed in 0..100u64 {
        let set = common::random_tx_set(seed);
        txs += set.phases.iter().map(|p| p.1.len()).sum::<usize>();
        let one = set.apply_shuffled(&mut ChaCha8Rng::seed_from_u64(2 * seed));
        let two = set.apply_shuffled(&mut ChaCha8Rng::seed_from_u64(2 * seed + 1));
        if one != two || !one.audit().conserved {
            bad.push(format!("set {seed}"));
        }
        if common::veto_scenario(seed, true, seed) != common::veto_scenario(seed, false, seed + 1) {
            bad.push(format!("veto {seed}"));
        }
    }
    check(bad.is_empty(), format!("100 transaction sets ({txs} transactions), 100 veto pairs, mismatches {bad:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("worked-example golden", worked_example),
        ("validity threshold sweep", validity_sweep),
        ("contest scaling", contest_scaling_bounds),
        ("cost reproduction", costs),
        ("incentive thresholds", thresholds),
        ("double-spend properties", double_spends),
        ("determinism", determinism),
        ("order independence", order_independence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
