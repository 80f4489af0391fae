//! Per-chain protocol state machine: validates the five transactions and
//! applies them to one chain's storage.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{self, contest_rank, Signature, WalletId};
use crate::protocol::{
    claim_message, conflicts, encode_veto_payload, finalize_message, finalize_veto_message,
    veto_deadline, Amount, Claim, Contest, Finalize, FinalizeVeto, ProofOfIntent, ProtocolError,
    Timestamp, Transaction, Veto, VetoKey,
};

pub const DEFAULT_REWARD: Amount = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
pub struct ChainId(pub u32);

impl std::fmt::Display for ChainId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "chain-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("malformed proof of intent: {0}")]
    MalformedPoi(#[from] ProtocolError),
    #[error("signature check failed")]
    BadSignature,
    #[error("insufficient balance: {balance} < {required}")]
    InsufficientBalance { wallet: WalletId, balance: Amount, required: Amount },
    #[error("proof of intent expired at {t1} (now {now})")]
    ExpiredPoi { t1: Timestamp, now: Timestamp },
    #[error("proof of intent conflicts with a known one from the same sender")]
    ConflictingPoi { existing: Box<ProofOfIntent>, incoming: Box<ProofOfIntent> },
    #[error("unknown proof of intent {0:?}")]
    UnknownPoi(Signature),
    #[error("a different proof of intent is stored under this id")]
    PoiMismatch,
    #[error("finalize before the validity window closed (t1 {t1}, now {now})")]
    PrematureFinalize { t1: Timestamp, now: Timestamp },
    #[error("already concluded")]
    AlreadyConcluded,
    #[error("proof of intent was vetoed")]
    VetoedPoi,
    #[error("proofs of intent do not conflict")]
    NotConflicting,
    #[error("no veto contest for this pair")]
    UnknownVeto,
    #[error("finalize-veto before the veto deadline ({deadline}, now {now})")]
    PrematureFinalizeVeto { deadline: Timestamp, now: Timestamp },
    #[error("veto contest closed at {deadline} (now {now})")]
    VetoContestClosed { deadline: Timestamp, now: Timestamp },
}

impl ContractError {
    /// Stable short name, used in logs and reports.
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::MalformedPoi(_) => "malformed-poi",
            ContractError::BadSignature => "bad-signature",
            ContractError::InsufficientBalance { .. } => "insufficient-balance",
            ContractError::ExpiredPoi { .. } => "expired-poi",
            ContractError::ConflictingPoi { .. } => "conflicting-poi",
            ContractError::UnknownPoi(_) => "unknown-poi",
            ContractError::PoiMismatch => "poi-mismatch",
            ContractError::PrematureFinalize { .. } => "premature-finalize",
            ContractError::AlreadyConcluded => "already-concluded",
            ContractError::VetoedPoi => "vetoed-poi",
            ContractError::NotConflicting => "not-conflicting",
            ContractError::UnknownVeto => "unknown-veto",
            ContractError::PrematureFinalizeVeto { .. } => "premature-finalize-veto",
            ContractError::VetoContestClosed { .. } => "veto-contest-closed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoiStatus {
    Pending,
    Finalized,
    Vetoed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VetoStatus {
    Open,
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Contestant {
    pub wallet: WalletId,
    pub omega: Signature,
}

/// Contestants kept sorted by (ω, wallet), so the winner is always first and
/// the list does not depend on arrival order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ContestantList(Vec<Contestant>);

impl ContestantList {
    /// Returns false if the wallet is already enrolled.
    fn enroll(&mut self, wallet: WalletId, omega: Signature) -> bool {
        if self.0.iter().any(|c| c.wallet == wallet) {
            return false;
        }
        let rank = contest_rank(&omega, &wallet);
        let at = self
            .0
            .partition_point(|c| contest_rank(&c.omega, &c.wallet) < rank);
        self.0.insert(at, Contestant { wallet, omega });
        true
    }

    pub fn winner(&self) -> Option<&Contestant> {
        self.0.first()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contestant> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoiRecord {
    pub poi: ProofOfIntent,
    pub contestants: ContestantList,
    pub status: PoiStatus,
    /// Wallet paid the witness reward at finalization (None: reward burned).
    pub winner: Option<WalletId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VetoRecord {
    pub sender: WalletId,
    pub deadline: Timestamp,
    pub veto_contestants: ContestantList,
    pub status: VetoStatus,
    /// Balance destroyed when the contest opened; caps the reward paid from it.
    pub burned_amount: Amount,
    pub winner: Option<WalletId>,
}

/// What an accepted transaction did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Applied {
    Claimed { duplicate: bool },
    Contested { new_poi: bool, duplicate: bool },
    Finalized { winner: Option<WalletId> },
    VetoOpened { burned: Amount, canceled: Vec<Signature> },
    VetoJoined { duplicate: bool },
    VetoFinalized { winner: WalletId, paid: Amount },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupplyReport {
    pub balance_sum: Amount,
    pub burned: Amount,
    pub initial_supply: Amount,
    /// Net balance change made outside the transaction rules (re-sync after corruption).
    pub external_adjustment: i64,
    pub conserved: bool,
}

fn veto_key_str<S: Serializer>(map: &BTreeMap<VetoKey, VetoRecord>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k.to_hex(), v)))
}

/// One chain's contract storage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainState {
    pub chain_id: ChainId,
    pub reward: Amount,
    balances: BTreeMap<WalletId, Amount>,
    poi_records: BTreeMap<Signature, PoiRecord>,
    #[serde(serialize_with = "veto_key_str")]
    veto_records: BTreeMap<VetoKey, VetoRecord>,
    burned: Amount,
    initial_supply: Amount,
    external_adjustment: i64,
}

impl ChainState {
    pub fn new(chain_id: ChainId, genesis: impl IntoIterator<Item = (WalletId, Amount)>, reward: Amount) -> Self {
        let mut balances = BTreeMap::new();
        for (wallet, amount) in genesis {
            *balances.entry(wallet).or_insert(0) += amount;
        }
        let initial_supply = balances.values().sum();
        ChainState {
            chain_id,
            reward,
            balances,
            poi_records: BTreeMap::new(),
            veto_records: BTreeMap::new(),
            burned: 0,
            initial_supply,
            external_adjustment: 0,
        }
    }

    pub fn balance(&self, wallet: &WalletId) -> Amount {
        self.balances.get(wallet).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<WalletId, Amount> {
        &self.balances
    }

    pub fn burned(&self) -> Amount {
        self.burned
    }

    pub fn poi_record(&self, alpha: &Signature) -> Option<&PoiRecord> {
        self.poi_records.get(alpha)
    }

    pub fn poi_records(&self) -> impl Iterator<Item = &PoiRecord> {
        self.poi_records.values()
    }

    pub fn veto_record(&self, key: &VetoKey) -> Option<&VetoRecord> {
        self.veto_records.get(key)
    }

    pub fn veto_records(&self) -> impl Iterator<Item = (&VetoKey, &VetoRecord)> {
        self.veto_records.iter()
    }

    pub fn knows(&self, alpha: &Signature) -> bool {
        self.poi_records.contains_key(alpha)
    }

    pub fn apply(&mut self, tx: &Transaction, now: Timestamp) -> Result<Applied, ContractError> {
        match tx {
            Transaction::Claim(tx) => self.apply_claim(tx, now),
            Transaction::Contest(tx) => self.apply_contest(tx, now),
            Transaction::Finalize(tx) => self.apply_finalize(tx, now),
            Transaction::Veto(tx) => self.apply_veto(tx, now),
            Transaction::FinalizeVeto(tx) => self.apply_finalize_veto(tx, now),
        }
    }

    pub fn apply_claim(&mut self, tx: &Claim, now: Timestamp) -> Result<Applied, ContractError> {
        let poi = &tx.poi;
        poi.intent.check(self.reward)?;
        if !crypto::verify(&tx.poster, &claim_message(poi), &tx.signature) || !poi.verify() {
            return Err(ContractError::BadSignature);
        }
        check_not_expired(poi, now)?;
        if let Some(record) = self.poi_records.get(&poi.alpha) {
            check_same_and_pending(record, poi)?;
            return Ok(Applied::Claimed { duplicate: true });
        }
        self.check_admissible(poi)?;
        self.record(poi.clone(), PoiStatus::Pending);
        Ok(Applied::Claimed { duplicate: false })
    }

    pub fn apply_contest(&mut self, tx: &Contest, now: Timestamp) -> Result<Applied, ContractError> {
        let poi = &tx.poi;
        poi.intent.check(self.reward)?;
        if !crypto::verify(&tx.contestant, &poi.encode(), &tx.omega) {
            return Err(ContractError::BadSignature);
        }
        check_not_expired(poi, now)?;
        let new_poi = match self.poi_records.get(&poi.alpha) {
            Some(record) => {
                check_same_and_pending(record, poi)?;
                false
            }
            None => {
                if !poi.verify() {
                    return Err(ContractError::BadSignature);
                }
                self.check_admissible(poi)?;
                true
            }
        };
        if new_poi {
            self.record(poi.clone(), PoiStatus::Pending);
        }
        let record = self.poi_records.get_mut(&poi.alpha).expect("recorded above");
        let enrolled = record.contestants.enroll(tx.contestant, tx.omega);
        Ok(Applied::Contested { new_poi, duplicate: !enrolled })
    }

    pub fn apply_finalize(&mut self, tx: &Finalize, now: Timestamp) -> Result<Applied, ContractError> {
        if !crypto::verify(&tx.poster, &finalize_message(&tx.alpha), &tx.signature) {
            return Err(ContractError::BadSignature);
        }
        let record = self
            .poi_records
            .get(&tx.alpha)
            .ok_or(ContractError::UnknownPoi(tx.alpha))?;
        match record.status {
            PoiStatus::Finalized => return Err(ContractError::AlreadyConcluded),
            PoiStatus::Vetoed => return Err(ContractError::VetoedPoi),
            PoiStatus::Pending => {}
        }
        let intent = &record.poi.intent;
        if now <= intent.t1 {
            return Err(ContractError::PrematureFinalize { t1: intent.t1, now });
        }
        let (sender, recipient, amount) = (intent.sender, intent.recipient, intent.amount);
        let balance = self.balance(&sender);
        if balance < amount {
            return Err(ContractError::InsufficientBalance { wallet: sender, balance, required: amount });
        }
        let winner = record.contestants.winner().map(|c| c.wallet);

        self.debit(&sender, amount);
        self.credit(recipient, amount - self.reward);
        match winner {
            Some(w) => self.credit(w, self.reward),
            None => self.burned += self.reward,
        }
        let record = self.poi_records.get_mut(&tx.alpha).expect("checked above");
        record.status = PoiStatus::Finalized;
        record.winner = winner;
        Ok(Applied::Finalized { winner })
    }

    pub fn apply_veto(&mut self, tx: &Veto, now: Timestamp) -> Result<Applied, ContractError> {
        let known = self
            .poi_records
            .get(&tx.alpha)
            .ok_or(ContractError::UnknownPoi(tx.alpha))?
            .poi
            .clone();
        let other = &tx.conflicting_poi;
        other.intent.check(self.reward)?;
        if !other.verify() {
            return Err(ContractError::BadSignature);
        }
        if !conflicts(&known, other) {
            return Err(ContractError::NotConflicting);
        }
        if !crypto::verify(&tx.vetoer, &encode_veto_payload(&known, other), &tx.omega) {
            return Err(ContractError::BadSignature);
        }
        let key = VetoKey::new(known.alpha, other.alpha);

        if let Some(record) = self.veto_records.get_mut(&key) {
            if record.status == VetoStatus::Finalized {
                return Err(ContractError::AlreadyConcluded);
            }
            if now >= record.deadline {
                return Err(ContractError::VetoContestClosed { deadline: record.deadline, now });
            }
            let enrolled = record.veto_contestants.enroll(tx.vetoer, tx.omega);
            return Ok(Applied::VetoJoined { duplicate: !enrolled });
        }

        let sender = known.intent.sender;
        let deadline = veto_deadline(&known, other).map_err(|_| ContractError::NotConflicting)?;
        let burned = self.balance(&sender);
        self.debit(&sender, burned);
        self.burned += burned;

        let mut canceled = Vec::new();
        for record in self.poi_records.values_mut() {
            let intent = &record.poi.intent;
            if intent.sender == sender && record.status == PoiStatus::Pending && now < intent.t1 {
                record.status = PoiStatus::Vetoed;
                canceled.push(record.poi.alpha);
            }
        }
        // A conflicting proof learned only through this veto can never be finalized here.
        if !self.poi_records.contains_key(&other.alpha) {
            self.record(other.clone(), PoiStatus::Vetoed);
            canceled.push(other.alpha);
        }

        let mut veto_contestants = ContestantList::default();
        veto_contestants.enroll(tx.vetoer, tx.omega);
        self.veto_records.insert(
            key,
            VetoRecord {
                sender,
                deadline,
                veto_contestants,
                status: VetoStatus::Open,
                burned_amount: burned,
                winner: None,
            },
        );
        Ok(Applied::VetoOpened { burned, canceled })
    }

    pub fn apply_finalize_veto(&mut self, tx: &FinalizeVeto, now: Timestamp) -> Result<Applied, ContractError> {
        if !crypto::verify(&tx.poster, &finalize_veto_message(&tx.alpha, &tx.alpha_prime), &tx.signature) {
            return Err(ContractError::BadSignature);
        }
        let key = VetoKey::new(tx.alpha, tx.alpha_prime);
        let reward = self.reward;
        let record = self.veto_records.get_mut(&key).ok_or(ContractError::UnknownVeto)?;
        if record.status == VetoStatus::Finalized {
            return Err(ContractError::AlreadyConcluded);
        }
        if now <= record.deadline {
            return Err(ContractError::PrematureFinalizeVeto { deadline: record.deadline, now });
        }
        let winner = record
            .veto_contestants
            .winner()
            .expect("a veto record always has its opener")
            .wallet;
        let paid = reward.min(record.burned_amount);
        record.status = VetoStatus::Finalized;
        record.winner = Some(winner);
        self.burned -= paid;
        self.credit(winner, paid);
        Ok(Applied::VetoFinalized { winner, paid })
    }

    pub fn audit(&self) -> SupplyReport {
        let balance_sum: Amount = self.balances.values().sum();
        let expected = self.initial_supply as i128 + self.external_adjustment as i128;
        SupplyReport {
            balance_sum,
            burned: self.burned,
            initial_supply: self.initial_supply,
            external_adjustment: self.external_adjustment,
            conserved: (balance_sum as i128 + self.burned as i128) == expected,
        }
    }

    /// Overwrites a balance outside the transaction rules, tracking the change
    /// so the supply audit still balances.
    pub fn force_balance(&mut self, wallet: WalletId, amount: Amount) {
        let old = self.balance(&wallet);
        self.external_adjustment += amount as i64 - old as i64;
        self.balances.insert(wallet, amount);
    }

    /// Canonical JSON snapshot with sorted keys.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("chain state serializes")
    }

    /// Conflict first: a double-spend attempt must surface as a conflict
    /// even when the sender can no longer cover the amount.
    fn check_admissible(&self, poi: &ProofOfIntent) -> Result<(), ContractError> {
        if let Some(existing) = self.poi_records.values().find(|r| conflicts(&r.poi, poi)) {
            return Err(ContractError::ConflictingPoi {
                existing: Box::new(existing.poi.clone()),
                incoming: Box::new(poi.clone()),
            });
        }
        let sender = poi.intent.sender;
        let balance = self.balance(&sender);
        if balance < poi.intent.amount {
            return Err(ContractError::InsufficientBalance { wallet: sender, balance, required: poi.intent.amount });
        }
        Ok(())
    }

    fn record(&mut self, poi: ProofOfIntent, status: PoiStatus) {
        self.poi_records.insert(
            poi.alpha,
            PoiRecord { poi, contestants: ContestantList::default(), status, winner: None },
        );
    }

    fn credit(&mut self, wallet: WalletId, amount: Amount) {
        *self.balances.entry(wallet).or_insert(0) += amount;
    }

    fn debit(&mut self, wallet: &WalletId, amount: Amount) {
        let balance = self.balances.entry(*wallet).or_insert(0);
        *balance = balance.checked_sub(amount).expect("debit checked by caller");
    }
}

fn check_not_expired(poi: &ProofOfIntent, now: Timestamp) -> Result<(), ContractError> {
    if now >= poi.intent.t1 {
        return Err(ContractError::ExpiredPoi { t1: poi.intent.t1, now });
    }
    Ok(())
}

fn check_same_and_pending(record: &PoiRecord, poi: &ProofOfIntent) -> Result<(), ContractError> {
    if record.poi != *poi {
        return Err(ContractError::PoiMismatch);
    }
    match record.status {
        PoiStatus::Pending => Ok(()),
        PoiStatus::Finalized => Err(ContractError::AlreadyConcluded),
        PoiStatus::Vetoed => Err(ContractError::VetoedPoi),
    }
}
