//! Participant behaviour: transfer-initiating clients, contest observers and
//! veto watchdogs. Each rule is a small pure function; the ecosystem engine
//! owns the clock, the randomness and the bookkeeping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contract::ChainState;
use crate::crypto::{WalletId, OMEGA_LEN};
use crate::protocol::{conflicts, Amount, ProofOfIntent, Timestamp};

/// Simulation clock, milliseconds.
pub type SimTime = u64;

pub fn secs_to_ms(secs: Timestamp) -> SimTime {
    secs * 1000
}

/// Workload of the transfer-initiating clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientWorkload {
    pub count: usize,
    pub initial_balance: Amount,
    /// Think time between transfers, seconds.
    pub think_time_min: f64,
    pub think_time_max: f64,
}

impl Default for ClientWorkload {
    fn default() -> Self {
        ClientWorkload { count: 10, initial_balance: 1000, think_time_min: 15.0, think_time_max: 30.0 }
    }
}

impl ClientWorkload {
    pub fn sample_think_time<R: Rng>(&self, rng: &mut R) -> SimTime {
        let secs = if self.think_time_max > self.think_time_min {
            rng.gen_range(self.think_time_min..=self.think_time_max)
        } else {
            self.think_time_min
        };
        (secs * 1000.0).round() as SimTime
    }

    /// Amount drawn uniformly from `[reward + 1, balance]`, or `None` when
    /// the balance cannot cover a transfer.
    pub fn sample_amount<R: Rng>(&self, rng: &mut R, balance: Amount, reward: Amount) -> Option<Amount> {
        let low = reward + 1;
        (balance >= low).then(|| rng.gen_range(low..=balance))
    }
}

/// How observers react to newly seen proofs of intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverPolicy {
    /// Number of observers, n.
    pub count: usize,
    /// Observation delay, per observer, chain and event, uniform in milliseconds.
    pub delay_min_ms: SimTime,
    pub delay_max_ms: SimTime,
    /// Post a contest only where it can still win.
    pub post_iff_winnable: bool,
    /// Observers also report conflicting proofs.
    pub watchdog: bool,
}

impl Default for ObserverPolicy {
    fn default() -> Self {
        ObserverPolicy { count: 10, delay_min_ms: 0, delay_max_ms: 2000, post_iff_winnable: true, watchdog: true }
    }
}

impl ObserverPolicy {
    pub fn sample_delay<R: Rng>(&self, rng: &mut R) -> SimTime {
        if self.delay_max_ms > self.delay_min_ms {
            rng.gen_range(self.delay_min_ms..=self.delay_max_ms)
        } else {
            self.delay_min_ms
        }
    }
}

pub type Rank = ([u8; OMEGA_LEN], WalletId);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientDecision {
    /// Try again at the given time.
    Wait { until: SimTime },
    Transfer { recipient: usize, amount: Amount, t0: Timestamp, claim_chain: usize },
}

/// What a client does when its turn comes.
///
/// `busy_until` is the settlement time of the client's previous transfer;
/// `balance` is the lowest balance the client sees across chains.
#[allow(clippy::too_many_arguments)]
pub fn client_step<R: Rng>(
    workload: &ClientWorkload,
    rng: &mut R,
    now: SimTime,
    busy_until: Option<SimTime>,
    balance: Amount,
    reward: Amount,
    recipients: &[usize],
    chain_count: usize,
) -> ClientDecision {
    if let Some(until) = busy_until.filter(|&u| u > now) {
        return ClientDecision::Wait { until };
    }
    if recipients.is_empty() {
        return ClientDecision::Wait { until: now + workload.sample_think_time(rng) };
    }
    let Some(amount) = workload.sample_amount(rng, balance, reward) else {
        return ClientDecision::Wait { until: now + workload.sample_think_time(rng) };
    };
    let recipient = recipients[rng.gen_range(0..recipients.len())];
    let claim_chain = rng.gen_range(0..chain_count);
    let t0 = now.div_ceil(1000);
    ClientDecision::Transfer { recipient, amount, t0, claim_chain }
}

/// Whether an observer with rank `own` posts a contest given the best rank
/// it can currently see on the chain.
pub fn observer_step(policy: &ObserverPolicy, own: &Rank, best_seen: Option<&Rank>) -> bool {
    if !policy.post_iff_winnable {
        return true;
    }
    match best_seen {
        None => true,
        Some(best) => own < best,
    }
}

/// Picks which of two conflicting proofs a veto on `chain` must cite as the
/// known one. `None` when the chain knows neither yet, or the pair does not conflict.
pub fn watchdog_step<'a>(
    chain: &ChainState,
    a: &'a ProofOfIntent,
    b: &'a ProofOfIntent,
) -> Option<(&'a ProofOfIntent, &'a ProofOfIntent)> {
    if !conflicts(a, b) {
        return None;
    }
    if chain.knows(&a.alpha) {
        Some((a, b))
    } else if chain.knows(&b.alpha) {
        Some((b, a))
    } else {
        None
    }
}
