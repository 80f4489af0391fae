//! Gas and USD cost of a transfer per role, and the token price above which
//! contesting pays off for an observer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecosystem::RunReport;
use crate::protocol::{Amount, TxKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("at least two observers are needed for a positive winning share (got {0})")]
    TooFewObservers(usize),
    #[error("reward must be positive")]
    ZeroReward,
    #[error("chain count must be positive")]
    NoChains,
}

/// Mean and standard deviation of one transaction's cost, thousands of Gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasStat {
    pub mean_kgas: f64,
    pub sd_kgas: f64,
}

const fn stat(mean_kgas: f64, sd_kgas: f64) -> GasStat {
    GasStat { mean_kgas, sd_kgas }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasTable {
    pub claim: GasStat,
    pub contest: GasStat,
    pub finalize: GasStat,
    pub veto: GasStat,
    pub finalize_veto: GasStat,
}

impl Default for GasTable {
    fn default() -> Self {
        GasTable {
            claim: stat(57.7, 11.1),
            contest: stat(81.5, 64.2),
            finalize: stat(45.5, 0.1),
            veto: stat(131.3, 91.9),
            finalize_veto: stat(48.6, 1.7),
        }
    }
}

impl GasTable {
    pub fn get(&self, kind: TxKind) -> GasStat {
        match kind {
            TxKind::Claim => self.claim,
            TxKind::Contest => self.contest,
            TxKind::Finalize => self.finalize,
            TxKind::Veto => self.veto,
            TxKind::FinalizeVeto => self.finalize_veto,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in TxKind::ALL {
            let s = self.get(kind);
            if !(s.mean_kgas.is_finite() && s.mean_kgas > 0.0) {
                return Err(format!("gas mean for {kind} must be positive"));
            }
            if !(s.sd_kgas.is_finite() && s.sd_kgas >= 0.0) {
                return Err(format!("gas deviation for {kind} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceModel {
    pub gas_price_gwei: f64,
    pub ether_usd: f64,
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel { gas_price_gwei: 10.0, ether_usd: 115.71 }
    }
}

impl PriceModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gas_price_gwei.is_finite() && self.gas_price_gwei >= 0.0) {
            return Err("gas price must be non-negative".into());
        }
        if !(self.ether_usd.is_finite() && self.ether_usd >= 0.0) {
            return Err("ether price must be non-negative".into());
        }
        Ok(())
    }

    pub fn kgas_to_usd(&self, kgas: f64) -> f64 {
        kgas * 1e3 * self.gas_price_gwei * 1e-9 * self.ether_usd
    }
}

/// Nth harmonic number.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCost {
    pub m: usize,
    pub n: usize,
    pub sender_kgas: f64,
    pub sender_usd: f64,
    /// One claim plus a finalize on every chain.
    pub receiver_kgas: f64,
    pub receiver_usd: f64,
    /// Cost borne by one posting observer: a contest on every chain.
    pub observer_kgas: f64,
    pub observer_usd: f64,
    pub expected_posters_log2: f64,
    pub expected_posters_harmonic: f64,
    /// All posting observers together, using the log2 estimate.
    pub observers_total_usd: f64,
}

pub fn transfer_cost(m: usize, n: usize, gas: &GasTable, price: &PriceModel) -> TransferCost {
    let receiver_kgas = gas.claim.mean_kgas + m as f64 * gas.finalize.mean_kgas;
    let observer_kgas = m as f64 * gas.contest.mean_kgas;
    let expected_posters_log2 = (n.max(1) as f64).log2();
    let observer_usd = price.kgas_to_usd(observer_kgas);
    TransferCost {
        m,
        n,
        sender_kgas: 0.0,
        sender_usd: 0.0,
        receiver_kgas,
        receiver_usd: price.kgas_to_usd(receiver_kgas),
        observer_kgas,
        observer_usd,
        expected_posters_log2,
        expected_posters_harmonic: harmonic(n),
        observers_total_usd: observer_usd * expected_posters_log2,
    }
}

/// Token price (USD) above which an observer's expected reward,
/// `log2(n) / n * reward * price`, exceeds its contest cost.
///
/// With `round_cost` the observer cost is first rounded to whole cents.
pub fn min_viable_price(
    n: usize,
    m: usize,
    reward: Amount,
    gas: &GasTable,
    price: &PriceModel,
    round_cost: bool,
) -> Result<f64, CostError> {
    if n < 2 {
        return Err(CostError::TooFewObservers(n));
    }
    if m == 0 {
        return Err(CostError::NoChains);
    }
    if reward == 0 {
        return Err(CostError::ZeroReward);
    }
    let mut cost = transfer_cost(m, n, gas, price).observer_usd;
    if round_cost {
        cost = (cost * 100.0).round() / 100.0;
    }
    Ok(cost * n as f64 / ((n as f64).log2() * reward as f64))
}

/// Witness reward as a function of the transferred amount.
pub trait RewardSchedule {
    fn reward(&self, amount: Amount) -> Amount;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedReward(pub Amount);

impl RewardSchedule for FixedReward {
    fn reward(&self, _amount: Amount) -> Amount {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleCost {
    pub transactions: u64,
    pub kgas: f64,
    pub usd: f64,
}

/// Costs of a finished run, from the transactions the chains accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedCost {
    pub transfers: usize,
    /// Claims and finalizes.
    pub receivers: RoleCost,
    /// Contests.
    pub observers: RoleCost,
    /// Vetoes and finalize-vetoes.
    pub watchdogs: RoleCost,
    /// Observer cost per finalized transfer; zero when none finalized.
    pub observer_usd_per_transfer: f64,
}

pub fn simulated_cost_report(report: &RunReport, gas: &GasTable, price: &PriceModel) -> SimulatedCost {
    let role = |kinds: &[TxKind]| {
        let mut transactions = 0;
        let mut kgas = 0.0;
        for &kind in kinds {
            let count = report.tx_totals.get(kind.name()).map_or(0, |c| c.ok);
            transactions += count;
            kgas += count as f64 * gas.get(kind).mean_kgas;
        }
        RoleCost { transactions, kgas, usd: price.kgas_to_usd(kgas) }
    };
    let observers = role(&[TxKind::Contest]);
    let finalized = report.transfers.iter().filter(|t| t.finalized_anywhere()).count();
    SimulatedCost {
        transfers: report.transfers.len(),
        receivers: role(&[TxKind::Claim, TxKind::Finalize]),
        watchdogs: role(&[TxKind::Veto, TxKind::FinalizeVeto]),
        observer_usd_per_transfer: if finalized == 0 { 0.0 } else { observers.usd / finalized as f64 },
        observers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ten_chain_costs() {
        let c = transfer_cost(10, 10, &GasTable::default(), &PriceModel::default());
        assert!(close(c.receiver_kgas, 512.7, 1e-9));
        assert!(close(c.observer_kgas, 815.0, 1e-9));
        assert!(close(c.receiver_usd, 0.593_25, 1e-4));
        assert!(close(c.observer_usd, 0.943_04, 1e-4));
        assert_eq!(c.sender_usd, 0.0);
    }

    #[test]
    fn zero_gas_price_is_free() {
        let price = PriceModel { gas_price_gwei: 0.0, ..PriceModel::default() };
        let c = transfer_cost(1, 4, &GasTable::default(), &price);
        assert_eq!((c.receiver_usd, c.observer_usd, c.observers_total_usd), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_in_chain_count() {
        let (g, p) = (GasTable::default(), PriceModel::default());
        let one = transfer_cost(1, 8, &g, &p);
        let five = transfer_cost(5, 8, &g, &p);
        assert!(close(five.observer_kgas, 5.0 * one.observer_kgas, 1e-9));
        assert!(close(five.receiver_kgas - one.receiver_kgas, 4.0 * g.finalize.mean_kgas, 1e-9));
    }

    #[test]
    fn thresholds() {
        let (g, p) = (GasTable::default(), PriceModel::default());
        let rounded: Vec<f64> = [10, 100, 1000]
            .iter()
            .map(|&n| min_viable_price(n, 10, 1, &g, &p, true).unwrap())
            .collect();
        assert!(close(rounded[0], 2.8297, 1e-3));
        assert!(close(rounded[1], 14.1484, 1e-3));
        assert!(close(rounded[2], 94.3227, 1e-3));
        let raw = min_viable_price(100, 10, 1, &g, &p, false).unwrap();
        assert!(close(raw, 14.194, 1e-2));
        let doubled = min_viable_price(100, 10, 2, &g, &p, true).unwrap();
        assert!(close(doubled * 2.0, rounded[1], 1e-9));
    }

    #[test]
    fn threshold_inverts_the_break_even() {
        let (g, p) = (GasTable::default(), PriceModel::default());
        for n in [2, 3, 17, 250] {
            let price = min_viable_price(n, 4, 3, &g, &p, false).unwrap();
            let cost = transfer_cost(4, n, &g, &p).observer_usd;
            assert!(close(price * (n as f64).log2() / n as f64 * 3.0, cost, 1e-9));
        }
    }

    #[test]
    fn threshold_errors() {
        let (g, p) = (GasTable::default(), PriceModel::default());
        assert_eq!(min_viable_price(1, 10, 1, &g, &p, true), Err(CostError::TooFewObservers(1)));
        assert_eq!(min_viable_price(10, 10, 0, &g, &p, true), Err(CostError::ZeroReward));
        let free = PriceModel { ether_usd: 0.0, ..p };
        assert_eq!(min_viable_price(10, 10, 1, &g, &free, true), Ok(0.0));
    }

    #[test]
    fn harmonic_numbers() {
        assert!(close(harmonic(4), 2.083_333, 1e-5));
        assert!(close(harmonic(16), 3.380_729, 1e-5));
        assert_eq!(harmonic(0), 0.0);
    }

    #[test]
    fn fixed_reward_ignores_amount() {
        assert_eq!(FixedReward(1).reward(20), 1);
        assert_eq!(FixedReward(1).reward(9_000), 1);
    }
}
