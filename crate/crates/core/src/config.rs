//! Ecosystem configuration, read from JSON.
//!
//! Every field has a default, so `{}` is a valid configuration describing the
//! standard three-chain, ten-client setup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ClientWorkload, ObserverPolicy};
use crate::chain::{ChainConfig, ChainError, DEFAULT_BLOCK_INTERVAL, DEFAULT_MAX_TXS_PER_BLOCK};
use crate::contract::{ChainId, DEFAULT_REWARD};
use crate::costmodel::{GasTable, PriceModel};
use crate::crypto::{generate_keypair, seed_from_label, KeyPair};
use crate::protocol::{Amount, Timestamp};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// A wallet with a name, an optional fixed key seed and a genesis balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalletSpec {
    pub name: String,
    #[serde(default)]
    pub balance: Amount,
    /// 32-byte hex seed; derived from the name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_seed: Option<String>,
    /// Acts as an observer (contestant and watchdog) in addition to the generated ones.
    #[serde(default)]
    pub observer: bool,
}

impl WalletSpec {
    pub fn keypair(&self) -> Result<KeyPair, ConfigError> {
        match &self.key_seed {
            Some(text) => {
                let raw = hex::decode(text).map_err(|e| invalid(format!("wallet {}: key_seed: {e}", self.name)))?;
                let seed: [u8; 32] = raw
                    .try_into()
                    .map_err(|_| invalid(format!("wallet {}: key_seed must be 32 bytes", self.name)))?;
                Ok(generate_keypair(seed))
            }
            None => Ok(generate_keypair(seed_from_label(format!("wallet:{}", self.name).as_bytes()))),
        }
    }
}

/// A transfer fired at a fixed time between two named wallets. Two scripted
/// transfers from the same sender with overlapping windows form a double spend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedTransfer {
    pub sender: String,
    pub recipient: String,
    pub amount: Amount,
    pub t0: Timestamp,
    pub t1: Timestamp,
    #[serde(default)]
    pub claim_chain: u32,
    /// Seconds; defaults to `t0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submit_at: Option<f64>,
    /// Seconds at which the recipient posts finalize on every chain; by
    /// default it posts on each chain when that chain's clock reads `t1`
    /// plus one block interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finalize_at: Option<f64>,
}

/// Parameters only the experiment campaigns read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Validity lengths swept by `sweep-validity`, seconds.
    pub validity_values: Vec<Timestamp>,
    /// Observer counts for `contest-scaling`.
    pub n_values: Vec<usize>,
    /// Validity used by each `contest-scaling` transfer, seconds.
    pub scaling_validity: Timestamp,
    /// Chain counts and observer counts for the cost and incentive grid.
    pub cost_m_values: Vec<usize>,
    pub cost_n_values: Vec<usize>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            validity_values: (10..=70).step_by(5).collect(),
            n_values: vec![1, 4, 16, 64],
            scaling_validity: 65,
            cost_m_values: vec![10],
            cost_n_values: vec![10, 100, 1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcosystemConfig {
    /// Number of chains, m.
    pub chain_count: usize,
    pub block_interval: Timestamp,
    pub max_txs_per_block: usize,
    /// Block interval jitter, fraction of the interval.
    pub jitter: f64,
    /// Per-chain clock offsets in seconds; missing entries are zero.
    pub clock_skew: Vec<i64>,
    pub reward: Amount,
    /// Validity window length of client transfers, seconds.
    pub validity_length: Timestamp,
    /// Simulated seconds during which clients start transfers.
    pub duration: Timestamp,
    pub seed: u64,
    pub clients: ClientWorkload,
    pub observers: ObserverPolicy,
    pub wallets: Vec<WalletSpec>,
    pub scripted_transfers: Vec<ScriptedTransfer>,
    /// Keep a per-block log of every chain.
    pub block_log: bool,
    pub gas: GasTable,
    pub price: PriceModel,
    pub experiment: ExperimentParams,
}

impl Default for EcosystemConfig {
    fn default() -> Self {
        EcosystemConfig {
            chain_count: 3,
            block_interval: DEFAULT_BLOCK_INTERVAL,
            max_txs_per_block: DEFAULT_MAX_TXS_PER_BLOCK,
            jitter: 0.0,
            clock_skew: Vec::new(),
            reward: DEFAULT_REWARD,
            validity_length: 65,
            duration: 1800,
            seed: 0,
            clients: ClientWorkload::default(),
            observers: ObserverPolicy::default(),
            wallets: Vec::new(),
            scripted_transfers: Vec::new(),
            block_log: false,
            gas: GasTable::default(),
            price: PriceModel::default(),
            experiment: ExperimentParams::default(),
        }
    }
}

const WORKED_EXAMPLE: &str = include_str!("../configs/worked_example.json");

impl EcosystemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: EcosystemConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The three-chain, single-transfer walkthrough (80 PBT sender, 20 PBT
    /// transfer, window [1, 61], three contestants).
    pub fn worked_example() -> Self {
        Self::from_json(WORKED_EXAMPLE).expect("bundled worked example is valid")
    }

    pub fn worked_example_json() -> &'static str {
        WORKED_EXAMPLE
    }

    pub fn chain_configs(&self) -> Vec<ChainConfig> {
        (0..self.chain_count)
            .map(|i| ChainConfig {
                chain_id: ChainId(i as u32),
                block_interval: self.block_interval,
                max_txs_per_block: self.max_txs_per_block,
                jitter: self.jitter,
                clock_skew: self.clock_skew.get(i).copied().unwrap_or(0),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chain_count == 0 {
            return Err(invalid("chain_count must be at least 1"));
        }
        if self.clock_skew.len() > self.chain_count {
            return Err(invalid("clock_skew has more entries than chains"));
        }
        for chain in self.chain_configs() {
            chain.validate()?;
        }
        if self.validity_length == 0 {
            return Err(invalid("validity_length must be positive"));
        }
        let c = &self.clients;
        if !(c.think_time_min > 0.0 && c.think_time_max >= c.think_time_min) {
            return Err(invalid("think time bounds must be positive and ordered"));
        }
        let o = &self.observers;
        if o.delay_max_ms < o.delay_min_ms {
            return Err(invalid("observer delay bounds out of order"));
        }

        let mut names = std::collections::BTreeSet::new();
        for w in &self.wallets {
            if w.name.is_empty() || w.name.starts_with("client-") || w.name.starts_with("observer-") {
                return Err(invalid(format!("wallet name {:?} is empty or reserved", w.name)));
            }
            if !names.insert(w.name.as_str()) {
                return Err(invalid(format!("duplicate wallet {:?}", w.name)));
            }
            w.keypair()?;
        }
        for (i, t) in self.scripted_transfers.iter().enumerate() {
            for name in [&t.sender, &t.recipient] {
                if !names.contains(name.as_str()) {
                    return Err(invalid(format!("scripted transfer {i}: unknown wallet {name:?}")));
                }
            }
            if t.t0 >= t.t1 {
                return Err(invalid(format!("scripted transfer {i}: empty window [{}, {}]", t.t0, t.t1)));
            }
            if t.amount <= self.reward {
                return Err(invalid(format!("scripted transfer {i}: amount must exceed the reward")));
            }
            if t.claim_chain as usize >= self.chain_count {
                return Err(invalid(format!("scripted transfer {i}: claim_chain out of range")));
            }
        }
        self.gas.validate().map_err(invalid)?;
        self.price.validate().map_err(invalid)?;
        Ok(())
    }
}
