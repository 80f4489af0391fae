//! Wallet keys, deterministic signatures, and the "lowest ω" ordering used to
//! pick contest winners.
//!
//! Signatures are Ed25519 (RFC 8032), whose nonce is derived from the secret
//! key and the message, so signing is a pure function. The ω value of a
//! signature is its first 32-byte component (the encoded commitment point)
//! read as a big-endian unsigned integer.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const OMEGA_LEN: usize = 32;

/// A wallet address. The public key doubles as the wallet id.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WalletId(pub [u8; PUBLIC_KEY_LEN]);

impl WalletId {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex digits, for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for WalletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WalletId({})", self.short())
    }
}

impl fmt::Display for WalletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A detached signature: the 32-byte ω component followed by the 32-byte scalar.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    /// The ω value, big-endian.
    pub fn omega(&self) -> &[u8] {
        &self.0[..OMEGA_LEN]
    }

    /// Builds a signature whose ω starts with `prefix` and is zero elsewhere.
    /// Only useful for ordering tests; it will not verify.
    pub fn from_omega_prefix(prefix: &[u8]) -> Self {
        let mut bytes = [0u8; SIGNATURE_LEN];
        bytes[..prefix.len()].copy_from_slice(prefix);
        Signature(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.short())
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

// ω first, then the remaining bytes: a strict total order on distinct signatures.
impl Ord for Signature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Signature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `true` iff `a` has the strictly lower ω.
pub fn omega_less(a: &Signature, b: &Signature) -> bool {
    a.omega() < b.omega()
}

/// Contest ranking: lowest ω wins, ties go to the lower public key.
pub fn contest_rank(omega: &Signature, wallet: &WalletId) -> ([u8; OMEGA_LEN], WalletId) {
    let mut w = [0u8; OMEGA_LEN];
    w.copy_from_slice(omega.omega());
    (w, *wallet)
}

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: WalletId,
}

impl KeyPair {
    pub fn public(&self) -> WalletId {
        self.public
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.signing.to_bytes() == other.signing.to_bytes()
    }
}

impl Eq for KeyPair {}

pub fn generate_keypair(seed: [u8; 32]) -> KeyPair {
    let signing = SigningKey::from_bytes(&seed);
    let public = WalletId(signing.verifying_key().to_bytes());
    KeyPair { signing, public }
}

/// Derives 32 bytes of seed material from an arbitrary label.
pub fn seed_from_label(label: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"dextt-key-seed");
    hasher.update(label);
    hasher.finalize().into()
}

pub fn sign(key: &KeyPair, message: &[u8]) -> Signature {
    Signature(key.signing.sign(message).to_bytes())
}

const VERIFY_CACHE_LIMIT: usize = 1 << 16;

thread_local! {
    // Verification is pure, and every chain re-checks the same signatures.
    static VERIFIED: RefCell<HashMap<[u8; 32], bool>> = RefCell::new(HashMap::new());
}

pub fn verify(public_key: &WalletId, message: &[u8], sig: &Signature) -> bool {
    let mut hasher = Sha256::new();
    hasher.update(public_key.0);
    hasher.update(sig.0);
    hasher.update(message);
    let key: [u8; 32] = hasher.finalize().into();

    if let Some(hit) = VERIFIED.with(|c| c.borrow().get(&key).copied()) {
        return hit;
    }
    let ok = verify_uncached(public_key, message, sig);
    VERIFIED.with(|c| {
        let mut cache = c.borrow_mut();
        if cache.len() >= VERIFY_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, ok);
    });
    ok
}

fn verify_uncached(public_key: &WalletId, message: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(message, &sig).is_ok()
}

macro_rules! hex_serde {
    ($ty:ident, $len:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                let raw = hex::decode(&text).map_err(serde::de::Error::custom)?;
                let bytes: [u8; $len] = raw.try_into().map_err(|v: Vec<u8>| {
                    serde::de::Error::custom(format!("expected {} bytes, got {}", $len, v.len()))
                })?;
                Ok($ty(bytes))
            }
        }
    };
}

hex_serde!(WalletId, PUBLIC_KEY_LEN);
hex_serde!(Signature, SIGNATURE_LEN);
