//! Claim-first cross-chain token transfers: protocol types, a per-chain
//! contract state machine, a deterministic multi-chain simulator, and the
//! experiment campaigns built on top of it.

pub mod agents;
pub mod campaign;
pub mod chain;
pub mod config;
pub mod contract;
pub mod costmodel;
pub mod crypto;
pub mod ecosystem;
pub mod exec;
pub mod protocol;
pub mod report;

pub use contract::{ChainId, ChainState, ContractError};
pub use crypto::{KeyPair, Signature, WalletId};
pub use protocol::{ProofOfIntent, Transaction, TransferIntent};
