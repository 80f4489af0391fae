//! Chain-independent protocol types: transfer intents, proofs of intent, the
//! five transaction kinds, their canonical encoding, and conflict rules.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, KeyPair, Signature, WalletId};

/// Seconds since the simulation epoch.
pub type Timestamp = u64;

/// Token quantity in the smallest indivisible unit.
pub type Amount = u64;

const TAG_INTENT: &[u8] = b"dextt/intent/1";
const TAG_POI: &[u8] = b"dextt/poi/1";
const TAG_VETO: &[u8] = b"dextt/veto/1";
const TAG_CLAIM: &[u8] = b"dextt/claim/1";
const TAG_FINALIZE: &[u8] = b"dextt/finalize/1";
const TAG_FINALIZE_VETO: &[u8] = b"dextt/finalize-veto/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("validity window [{t0}, {t1}] is empty")]
    InvalidWindow { t0: Timestamp, t1: Timestamp },
    #[error("amount {amount} does not exceed the witness reward {reward}")]
    AmountNotAboveReward { amount: Amount, reward: Amount },
    #[error("proofs of intent do not conflict")]
    NotConflicting,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferIntent {
    pub sender: WalletId,
    pub recipient: WalletId,
    pub amount: Amount,
    pub t0: Timestamp,
    pub t1: Timestamp,
}

impl TransferIntent {
    pub fn check(&self, reward: Amount) -> Result<(), ProtocolError> {
        if self.t0 >= self.t1 {
            return Err(ProtocolError::InvalidWindow { t0: self.t0, t1: self.t1 });
        }
        if self.amount <= reward {
            return Err(ProtocolError::AmountNotAboveReward { amount: self.amount, reward });
        }
        Ok(())
    }

    pub fn validity_length(&self) -> Timestamp {
        self.t1.saturating_sub(self.t0)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Encoder::default();
        out.field(TAG_INTENT)
            .field(self.sender.as_bytes())
            .field(self.recipient.as_bytes())
            .u64(self.amount)
            .u64(self.t0)
            .u64(self.t1);
        out.finish()
    }
}

/// A transfer intent signed by the sender (`alpha`) and counter-signed by the
/// recipient (`beta`). `alpha` identifies the proof across the ecosystem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofOfIntent {
    pub intent: TransferIntent,
    pub alpha: Signature,
    pub beta: Signature,
}

impl ProofOfIntent {
    pub fn id(&self) -> Signature {
        self.alpha
    }

    pub fn sender(&self) -> WalletId {
        self.intent.sender
    }

    pub fn recipient(&self) -> WalletId {
        self.intent.recipient
    }

    pub fn is_self_transfer(&self) -> bool {
        self.intent.sender == self.intent.recipient
    }

    /// Checks both signatures.
    pub fn verify(&self) -> bool {
        let intent = self.intent.encode();
        crypto::verify(&self.intent.sender, &intent, &self.alpha)
            && crypto::verify(&self.intent.recipient, &countersign_message(&intent, &self.alpha), &self.beta)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Encoder::default();
        out.field(TAG_POI)
            .field(&self.intent.encode())
            .field(self.alpha.as_bytes())
            .field(self.beta.as_bytes());
        out.finish()
    }
}

fn countersign_message(encoded_intent: &[u8], alpha: &Signature) -> Vec<u8> {
    let mut msg = Vec::with_capacity(encoded_intent.len() + alpha.as_bytes().len());
    msg.extend_from_slice(encoded_intent);
    msg.extend_from_slice(alpha.as_bytes());
    msg
}

/// Builds a proof of intent: the sender signs the intent, the recipient
/// counter-signs the intent together with the sender's signature.
pub fn make_poi(
    sender: &KeyPair,
    recipient: &KeyPair,
    amount: Amount,
    t0: Timestamp,
    t1: Timestamp,
    reward: Amount,
) -> Result<ProofOfIntent, ProtocolError> {
    let intent = TransferIntent {
        sender: sender.public(),
        recipient: recipient.public(),
        amount,
        t0,
        t1,
    };
    intent.check(reward)?;
    let encoded = intent.encode();
    let alpha = crypto::sign(sender, &encoded);
    let beta = crypto::sign(recipient, &countersign_message(&encoded, &alpha));
    Ok(ProofOfIntent { intent, alpha, beta })
}

/// Two distinct proofs from the same sender whose closed validity windows overlap.
pub fn conflicts(a: &ProofOfIntent, b: &ProofOfIntent) -> bool {
    a.intent.sender == b.intent.sender
        && a.alpha != b.alpha
        && a.intent.t0 <= b.intent.t1
        && b.intent.t0 <= a.intent.t1
}

/// End of the veto contest: the later expiry plus the longer validity length.
pub fn veto_deadline(a: &ProofOfIntent, b: &ProofOfIntent) -> Result<Timestamp, ProtocolError> {
    if !conflicts(a, b) {
        return Err(ProtocolError::NotConflicting);
    }
    Ok(a.intent.t1.max(b.intent.t1) + a.intent.validity_length().max(b.intent.validity_length()))
}

/// Unordered pair of proof ids, stored low-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VetoKey {
    pub low: Signature,
    pub high: Signature,
}

impl VetoKey {
    pub fn new(a: Signature, b: Signature) -> Self {
        if a <= b {
            VetoKey { low: a, high: b }
        } else {
            VetoKey { low: b, high: a }
        }
    }

    pub fn contains(&self, alpha: &Signature) -> bool {
        self.low == *alpha || self.high == *alpha
    }

    pub fn to_hex(&self) -> String {
        format!("{}:{}", self.low.to_hex(), self.high.to_hex())
    }
}

/// The message a vetoer signs. Ordered by id so every chain sees the same ω
/// no matter which of the two proofs it learned first.
pub fn encode_veto_payload(a: &ProofOfIntent, b: &ProofOfIntent) -> Vec<u8> {
    let (first, second) = if a.alpha <= b.alpha { (a, b) } else { (b, a) };
    let mut out = Encoder::default();
    out.field(TAG_VETO).field(&first.encode()).field(&second.encode());
    out.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxKind {
    Claim,
    Contest,
    Finalize,
    Veto,
    FinalizeVeto,
}

impl TxKind {
    pub const ALL: [TxKind; 5] = [
        TxKind::Claim,
        TxKind::Contest,
        TxKind::Finalize,
        TxKind::Veto,
        TxKind::FinalizeVeto,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TxKind::Claim => "claim",
            TxKind::Contest => "contest",
            TxKind::Finalize => "finalize",
            TxKind::Veto => "veto",
            TxKind::FinalizeVeto => "finalize-veto",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub poi: ProofOfIntent,
    pub poster: WalletId,
    pub signature: Signature,
}

/// Signed by the contestant over the encoded proof; that signature is the ω.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contest {
    pub poi: ProofOfIntent,
    pub contestant: WalletId,
    pub omega: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finalize {
    pub alpha: Signature,
    pub poster: WalletId,
    pub signature: Signature,
}

/// `alpha` names the proof the chain already knows; the vetoer signs the
/// unordered pair, and that signature is the vetoer's ω.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Veto {
    pub alpha: Signature,
    pub conflicting_poi: ProofOfIntent,
    pub vetoer: WalletId,
    pub omega: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizeVeto {
    pub alpha: Signature,
    pub alpha_prime: Signature,
    pub poster: WalletId,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Transaction {
    Claim(Claim),
    Contest(Contest),
    Finalize(Finalize),
    Veto(Veto),
    FinalizeVeto(FinalizeVeto),
}

impl Transaction {
    pub fn claim(poi: ProofOfIntent, poster: &KeyPair) -> Self {
        let signature = crypto::sign(poster, &claim_message(&poi));
        Transaction::Claim(Claim { poi, poster: poster.public(), signature })
    }

    pub fn contest(poi: ProofOfIntent, contestant: &KeyPair) -> Self {
        let omega = crypto::sign(contestant, &poi.encode());
        Transaction::Contest(Contest { poi, contestant: contestant.public(), omega })
    }

    /// Contest with an ω the caller already computed (observers sign once per proof).
    pub fn contest_with_omega(poi: ProofOfIntent, contestant: WalletId, omega: Signature) -> Self {
        Transaction::Contest(Contest { poi, contestant, omega })
    }

    pub fn finalize(alpha: Signature, poster: &KeyPair) -> Self {
        let signature = crypto::sign(poster, &finalize_message(&alpha));
        Transaction::Finalize(Finalize { alpha, poster: poster.public(), signature })
    }

    /// `known` is the proof the target chain already stores; `conflicting` is the other one.
    pub fn veto(known: &ProofOfIntent, conflicting: ProofOfIntent, vetoer: &KeyPair) -> Self {
        let omega = crypto::sign(vetoer, &encode_veto_payload(known, &conflicting));
        Transaction::Veto(Veto {
            alpha: known.alpha,
            conflicting_poi: conflicting,
            vetoer: vetoer.public(),
            omega,
        })
    }

    pub fn finalize_veto(alpha: Signature, alpha_prime: Signature, poster: &KeyPair) -> Self {
        let signature = crypto::sign(poster, &finalize_veto_message(&alpha, &alpha_prime));
        Transaction::FinalizeVeto(FinalizeVeto { alpha, alpha_prime, poster: poster.public(), signature })
    }

    pub fn kind(&self) -> TxKind {
        match self {
            Transaction::Claim(_) => TxKind::Claim,
            Transaction::Contest(_) => TxKind::Contest,
            Transaction::Finalize(_) => TxKind::Finalize,
            Transaction::Veto(_) => TxKind::Veto,
            Transaction::FinalizeVeto(_) => TxKind::FinalizeVeto,
        }
    }

    pub fn poster(&self) -> WalletId {
        match self {
            Transaction::Claim(tx) => tx.poster,
            Transaction::Contest(tx) => tx.contestant,
            Transaction::Finalize(tx) => tx.poster,
            Transaction::Veto(tx) => tx.vetoer,
            Transaction::FinalizeVeto(tx) => tx.poster,
        }
    }

    /// The proof this transaction is primarily about.
    pub fn alpha(&self) -> Signature {
        match self {
            Transaction::Claim(tx) => tx.poi.alpha,
            Transaction::Contest(tx) => tx.poi.alpha,
            Transaction::Finalize(tx) => tx.alpha,
            Transaction::Veto(tx) => tx.alpha,
            Transaction::FinalizeVeto(tx) => tx.alpha,
        }
    }

    /// Proofs carried in full by this transaction.
    pub fn carried_pois(&self) -> Vec<&ProofOfIntent> {
        match self {
            Transaction::Claim(tx) => vec![&tx.poi],
            Transaction::Contest(tx) => vec![&tx.poi],
            Transaction::Veto(tx) => vec![&tx.conflicting_poi],
            Transaction::Finalize(_) | Transaction::FinalizeVeto(_) => Vec::new(),
        }
    }

    /// Short human-readable form for block logs.
    pub fn summary(&self) -> String {
        match self {
            Transaction::Claim(tx) => format!(
                "claim {} by {} ({} -> {} x{})",
                tx.poi.alpha.short(),
                tx.poster.short(),
                tx.poi.sender().short(),
                tx.poi.recipient().short(),
                tx.poi.intent.amount
            ),
            Transaction::Contest(tx) => format!(
                "contest {} by {} w={}",
                tx.poi.alpha.short(),
                tx.contestant.short(),
                tx.omega.short()
            ),
            Transaction::Finalize(tx) => format!("finalize {} by {}", tx.alpha.short(), tx.poster.short()),
            Transaction::Veto(tx) => format!(
                "veto {}/{} by {} w={}",
                tx.alpha.short(),
                tx.conflicting_poi.alpha.short(),
                tx.vetoer.short(),
                tx.omega.short()
            ),
            Transaction::FinalizeVeto(tx) => format!(
                "finalize-veto {}/{} by {}",
                tx.alpha.short(),
                tx.alpha_prime.short(),
                tx.poster.short()
            ),
        }
    }
}

pub(crate) fn claim_message(poi: &ProofOfIntent) -> Vec<u8> {
    let mut out = Encoder::default();
    out.field(TAG_CLAIM).field(&poi.encode());
    out.finish()
}

pub(crate) fn finalize_message(alpha: &Signature) -> Vec<u8> {
    let mut out = Encoder::default();
    out.field(TAG_FINALIZE).field(alpha.as_bytes());
    out.finish()
}

pub(crate) fn finalize_veto_message(a: &Signature, b: &Signature) -> Vec<u8> {
    let key = VetoKey::new(*a, *b);
    let mut out = Encoder::default();
    out.field(TAG_FINALIZE_VETO)
        .field(key.low.as_bytes())
        .field(key.high.as_bytes());
    out.finish()
}

/// Length-prefixed field concatenation; lengths are u32 big-endian.
#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keypair, seed_from_label};

    fn key(label: &str) -> KeyPair {
        generate_keypair(seed_from_label(label.as_bytes()))
    }

    fn poi(sender: &KeyPair, recipient: &KeyPair, amount: Amount, t0: Timestamp, t1: Timestamp) -> ProofOfIntent {
        make_poi(sender, recipient, amount, t0, t1, 1).unwrap()
    }

    #[test]
    fn worked_example_poi() {
        let (s, d) = (key("W_s"), key("W_d"));
        let p = poi(&s, &d, 20, 1, 61);
        assert!(p.verify());
        assert_eq!((p.intent.t0, p.intent.t1, p.intent.amount), (1, 61, 20));
        assert_eq!(p.id(), p.alpha);
    }

    #[test]
    fn make_poi_rejects_degenerate_inputs() {
        let (s, d) = (key("W_s"), key("W_d"));
        assert_eq!(
            make_poi(&s, &d, 1, 0, 10, 1),
            Err(ProtocolError::AmountNotAboveReward { amount: 1, reward: 1 })
        );
        assert_eq!(make_poi(&s, &d, 5, 10, 10, 1), Err(ProtocolError::InvalidWindow { t0: 10, t1: 10 }));
        assert!(make_poi(&s, &d, 2, 0, 10, 1).unwrap().verify());
    }

    #[test]
    fn tampered_poi_fails_verification() {
        let (s, d) = (key("W_s"), key("W_d"));
        let mut p = poi(&s, &d, 20, 1, 61);
        p.intent.amount = 21;
        assert!(!p.verify());
    }

    #[test]
    fn encoding_distinguishes_amounts() {
        let (s, d) = (key("a"), key("b"));
        let mut i = TransferIntent { sender: s.public(), recipient: d.public(), amount: 0, t0: 0, t1: 5 };
        let zero = i.encode();
        assert_eq!(zero, i.encode());
        i.amount = 1;
        assert_ne!(zero, i.encode());
    }

    #[test]
    fn conflict_cases() {
        let (s, d, e) = (key("W_s"), key("W_d"), key("W_e"));
        let a = poi(&s, &d, 8, 1, 61);
        let b = poi(&s, &e, 8, 30, 90);
        assert!(conflicts(&a, &b));
        assert!(!conflicts(&a, &a));
        let later = poi(&s, &d, 8, 62, 120);
        assert!(!conflicts(&a, &later));
        let touching = poi(&s, &d, 8, 61, 120);
        assert!(conflicts(&a, &touching));
        let other_sender = poi(&d, &s, 8, 1, 61);
        assert!(!conflicts(&a, &other_sender));
    }

    #[test]
    fn veto_deadline_examples() {
        let (s, d, e) = (key("W_s"), key("W_d"), key("W_e"));
        let deadline = |w1: (u64, u64), w2: (u64, u64)| {
            veto_deadline(&poi(&s, &d, 8, w1.0, w1.1), &poi(&s, &e, 8, w2.0, w2.1))
        };
        assert_eq!(deadline((1, 61), (1, 61)), Ok(121));
        assert_eq!(deadline((1, 61), (5, 65)), Ok(125));
        assert_eq!(deadline((0, 10), (0, 100)), Ok(200));
        assert_eq!(deadline((0, 10), (11, 100)), Err(ProtocolError::NotConflicting));
    }

    #[test]
    fn veto_payload_is_order_free() {
        let (s, d, e) = (key("W_s"), key("W_d"), key("W_e"));
        let a = poi(&s, &d, 8, 1, 61);
        let b = poi(&s, &e, 8, 1, 61);
        assert_eq!(encode_veto_payload(&a, &b), encode_veto_payload(&b, &a));
        let w = key("W_w");
        let v1 = Transaction::veto(&a, b.clone(), &w);
        let v2 = Transaction::veto(&b, a.clone(), &w);
        match (v1, v2) {
            (Transaction::Veto(a), Transaction::Veto(b)) => assert_eq!(a.omega, b.omega),
            _ => unreachable!(),
        }
        assert_eq!(VetoKey::new(a.alpha, b.alpha), VetoKey::new(b.alpha, a.alpha));
    }

    #[test]
    fn contest_omega_is_signature_over_poi() {
        let (s, d, u) = (key("W_s"), key("W_d"), key("W_u"));
        let p = poi(&s, &d, 20, 1, 61);
        let Transaction::Contest(c) = Transaction::contest(p.clone(), &u) else {
            unreachable!()
        };
        assert_eq!(c.contestant, u.public());
        assert!(crypto::verify(&u.public(), &p.encode(), &c.omega));
    }

    #[test]
    fn transaction_json_round_trip() {
        let (s, d) = (key("W_s"), key("W_d"));
        let tx = Transaction::claim(poi(&s, &d, 20, 1, 61), &d);
        let text = serde_json::to_string(&tx).unwrap();
        assert!(text.contains("\"type\":\"claim\""));
        assert_eq!(serde_json::from_str::<Transaction>(&text).unwrap(), tx);
    }
}
