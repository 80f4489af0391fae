//! A simulated blockchain: FIFO mempool, fixed-capacity blocks, and delivery
//! of each included transaction to the contract with the block timestamp.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{Applied, ChainId, ChainState, ContractError};
use crate::crypto::{contest_rank, Signature, WalletId, OMEGA_LEN};
use crate::protocol::{Timestamp, Transaction};

pub const DEFAULT_BLOCK_INTERVAL: Timestamp = 13;
/// Block gas limit divided by the mean contest cost, rounded.
pub const DEFAULT_MAX_TXS_PER_BLOCK: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("block interval must be positive")]
    ZeroInterval,
    #[error("block capacity must be positive")]
    ZeroCapacity,
    #[error("jitter {0} must lie in [0, 1) and keep blocks at least one second apart")]
    BadJitter(f64),
    #[error("block timestamp {next} does not advance past {last}")]
    NonIncreasingTimestamp { last: Timestamp, next: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub chain_id: ChainId,
    pub block_interval: Timestamp,
    pub max_txs_per_block: usize,
    /// Uniform block-interval jitter as a fraction of the interval; 0 disables it.
    #[serde(default)]
    pub jitter: f64,
    /// Seconds added to every block timestamp of this chain.
    #[serde(default)]
    pub clock_skew: i64,
}

impl ChainConfig {
    pub fn new(chain_id: ChainId) -> Self {
        ChainConfig {
            chain_id,
            block_interval: DEFAULT_BLOCK_INTERVAL,
            max_txs_per_block: DEFAULT_MAX_TXS_PER_BLOCK,
            jitter: 0.0,
            clock_skew: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.block_interval == 0 {
            return Err(ChainError::ZeroInterval);
        }
        if self.max_txs_per_block == 0 {
            return Err(ChainError::ZeroCapacity);
        }
        let min_gap = self.block_interval as f64 * (1.0 - self.jitter);
        if !(0.0..1.0).contains(&self.jitter) || min_gap < 1.0 {
            return Err(ChainError::BadJitter(self.jitter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub height: u64,
    pub timestamp: Timestamp,
    pub transactions: Vec<Transaction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProducedBlock {
    pub block: Block,
    /// One entry per transaction, in block order.
    pub results: Vec<Result<Applied, ContractError>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubmitAck {
    /// Zero-based position in the mempool at submission.
    pub queue_position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxLogEntry {
    pub kind: String,
    pub summary: String,
    pub result: String,
}

/// One line of the optional block log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockLogLine {
    pub chain_id: ChainId,
    pub height: u64,
    pub timestamp: Timestamp,
    pub txs: Vec<TxLogEntry>,
}

#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    state: ChainState,
    mempool: VecDeque<Transaction>,
    height: u64,
    last_timestamp: Timestamp,
    log: Option<Vec<BlockLogLine>>,
}

impl Chain {
    /// Genesis is height 0 at the chain's skewed epoch.
    pub fn new(config: ChainConfig, state: ChainState) -> Result<Self, ChainError> {
        config.validate()?;
        let last_timestamp = config.clock_skew.max(0) as Timestamp;
        Ok(Chain { config, state, mempool: VecDeque::new(), height: 0, last_timestamp, log: None })
    }

    pub fn with_block_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn id(&self) -> ChainId {
        self.config.chain_id
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn last_timestamp(&self) -> Timestamp {
        self.last_timestamp
    }

    /// Timestamp of the next block on the undisturbed schedule.
    pub fn next_scheduled_timestamp(&self) -> Timestamp {
        self.timestamp_at_height(self.height + 1)
    }

    pub fn timestamp_at_height(&self, height: u64) -> Timestamp {
        (height as i64 * self.config.block_interval as i64 + self.config.clock_skew).max(0) as Timestamp
    }

    pub fn block_log(&self) -> Option<&[BlockLogLine]> {
        self.log.as_deref()
    }

    pub fn mempool(&self) -> impl Iterator<Item = &Transaction> {
        self.mempool.iter()
    }

    pub fn submit(&mut self, tx: Transaction) -> SubmitAck {
        self.mempool.push_back(tx);
        SubmitAck { queue_position: self.mempool.len() - 1 }
    }

    /// Includes up to `max_txs_per_block` queued transactions in submission
    /// order and applies each at `timestamp`.
    pub fn produce_block(&mut self, timestamp: Timestamp) -> Result<ProducedBlock, ChainError> {
        if timestamp <= self.last_timestamp {
            return Err(ChainError::NonIncreasingTimestamp { last: self.last_timestamp, next: timestamp });
        }
        let take = self.mempool.len().min(self.config.max_txs_per_block);
        let transactions: Vec<Transaction> = self.mempool.drain(..take).collect();
        let results: Vec<_> = transactions.iter().map(|tx| self.state.apply(tx, timestamp)).collect();

        self.height += 1;
        self.last_timestamp = timestamp;
        if let Some(log) = self.log.as_mut() {
            log.push(BlockLogLine {
                chain_id: self.config.chain_id,
                height: self.height,
                timestamp,
                txs: transactions
                    .iter()
                    .zip(&results)
                    .map(|(tx, r)| TxLogEntry {
                        kind: tx.kind().name().to_string(),
                        summary: tx.summary(),
                        result: match r {
                            Ok(_) => "ok".to_string(),
                            Err(e) => e.code().to_string(),
                        },
                    })
                    .collect(),
            });
        }
        Ok(ProducedBlock { block: Block { height: self.height, timestamp, transactions }, results })
    }

    /// Best (lowest-ω) contestant for a proof, over both confirmed state and
    /// contests still waiting in the mempool.
    pub fn best_contestant(&self, alpha: &Signature) -> Option<([u8; OMEGA_LEN], WalletId)> {
        let confirmed = self
            .state
            .poi_record(alpha)
            .and_then(|r| r.contestants.winner())
            .map(|c| contest_rank(&c.omega, &c.wallet));
        let pending = self
            .mempool
            .iter()
            .filter_map(|tx| match tx {
                Transaction::Contest(c) if c.poi.alpha == *alpha => Some(contest_rank(&c.omega, &c.contestant)),
                _ => None,
            })
            .min();
        match (confirmed, pending) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Whether `wallet` already has a contest for `alpha` confirmed or queued.
    pub fn has_contest_from(&self, alpha: &Signature, wallet: &WalletId) -> bool {
        let confirmed = self
            .state
            .poi_record(alpha)
            .is_some_and(|r| r.contestants.iter().any(|c| c.wallet == *wallet));
        confirmed
            || self.mempool.iter().any(|tx| {
                matches!(tx, Transaction::Contest(c) if c.poi.alpha == *alpha && c.contestant == *wallet)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keypair, seed_from_label, KeyPair};
    use crate::protocol::make_poi;

    fn key(label: &str) -> KeyPair {
        generate_keypair(seed_from_label(label.as_bytes()))
    }

    fn chain(cap: usize) -> (Chain, KeyPair, KeyPair) {
        let (s, d) = (key("W_s"), key("W_d"));
        let mut config = ChainConfig::new(ChainId(0));
        config.max_txs_per_block = cap;
        let state = ChainState::new(ChainId(0), [(s.public(), 80)], 1);
        (Chain::new(config, state).unwrap(), s, d)
    }

    #[test]
    fn submitted_tx_lands_in_next_block() {
        let (mut c, s, d) = chain(100);
        let poi = make_poi(&s, &d, 20, 1, 61, 1).unwrap();
        c.submit(Transaction::claim(poi.clone(), &d));
        let out = c.produce_block(c.next_scheduled_timestamp()).unwrap();
        assert_eq!(out.block.height, 1);
        assert_eq!(out.block.timestamp, 13);
        assert_eq!(out.block.transactions.len(), 1);
        assert!(out.results[0].is_ok());
        assert!(c.state().knows(&poi.alpha));
    }

    #[test]
    fn capacity_rolls_over_in_fifo_order() {
        let (mut c, s, d) = chain(2);
        let poi = make_poi(&s, &d, 20, 1, 61, 1).unwrap();
        let observers: Vec<KeyPair> = (0..3).map(|i| key(&format!("o{i}"))).collect();
        for o in &observers {
            c.submit(Transaction::contest(poi.clone(), o));
        }
        let first = c.produce_block(13).unwrap();
        assert_eq!(first.block.transactions.len(), 2);
        assert_eq!(first.block.transactions[0].poster(), observers[0].public());
        assert_eq!(first.block.transactions[1].poster(), observers[1].public());
        let second = c.produce_block(26).unwrap();
        assert_eq!(second.block.transactions.len(), 1);
        assert_eq!(second.block.transactions[0].poster(), observers[2].public());
    }

    #[test]
    fn duplicate_contest_is_a_noop() {
        let (mut c, s, d) = chain(100);
        let poi = make_poi(&s, &d, 20, 1, 61, 1).unwrap();
        let u = key("W_u");
        let tx = Transaction::contest(poi.clone(), &u);
        c.submit(tx.clone());
        c.submit(tx);
        let out = c.produce_block(13).unwrap();
        assert_eq!(out.block.transactions.len(), 2);
        assert_eq!(out.results[1], Ok(Applied::Contested { new_poi: false, duplicate: true }));
        assert_eq!(c.state().poi_record(&poi.alpha).unwrap().contestants.len(), 1);
    }

    #[test]
    fn empty_block_leaves_state_alone() {
        let (mut c, ..) = chain(100);
        let before = c.state().clone();
        let out = c.produce_block(13).unwrap();
        assert!(out.block.transactions.is_empty());
        assert_eq!(c.state(), &before);
    }

    #[test]
    fn block_time_governs_finalize() {
        // Submitted while t1 has not passed, included in a block after t1.
        let (mut c, s, d) = chain(100);
        let poi = make_poi(&s, &d, 20, 1, 20, 1).unwrap();
        c.submit(Transaction::claim(poi.clone(), &d));
        c.produce_block(13).unwrap();
        c.submit(Transaction::finalize(poi.alpha, &d));
        let out = c.produce_block(26).unwrap();
        assert_eq!(out.results[0], Ok(Applied::Finalized { winner: None }));
        assert_eq!(c.state().balance(&s.public()), 60);
    }

    #[test]
    fn timestamps_must_advance() {
        let (mut c, ..) = chain(100);
        c.produce_block(13).unwrap();
        assert_eq!(
            c.produce_block(13),
            Err(ChainError::NonIncreasingTimestamp { last: 13, next: 13 })
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = ChainConfig::new(ChainId(1));
        assert!(cfg.validate().is_ok());
        cfg.jitter = 0.99;
        assert!(cfg.validate().is_err());
        cfg.jitter = 0.2;
        cfg.block_interval = 0;
        assert_eq!(cfg.validate(), Err(ChainError::ZeroInterval));
    }

    #[test]
    fn best_contestant_sees_mempool() {
        let (mut c, s, d) = chain(100);
        let poi = make_poi(&s, &d, 20, 1, 61, 1).unwrap();
        assert!(c.best_contestant(&poi.alpha).is_none());
        let u = key("W_u");
        c.submit(Transaction::contest(poi.clone(), &u));
        let best = c.best_contestant(&poi.alpha).unwrap();
        assert_eq!(best.1, u.public());
        assert!(c.has_contest_from(&poi.alpha, &u.public()));
        c.produce_block(13).unwrap();
        assert_eq!(c.best_contestant(&poi.alpha), Some(best));
    }

    #[test]
    fn block_log_records_results() {
        let (c, s, d) = chain(100);
        let mut c = c.with_block_log();
        let poi = make_poi(&s, &d, 20, 1, 61, 1).unwrap();
        c.submit(Transaction::finalize(poi.alpha, &d));
        c.produce_block(13).unwrap();
        let log = c.block_log().unwrap();
        assert_eq!(log[0].txs[0].result, "unknown-poi");
        assert_eq!(log[0].height, 1);
    }
}
