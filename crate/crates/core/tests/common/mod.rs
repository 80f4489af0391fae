#![allow(dead_code)]

use dextt_core::contract::{ChainId, ChainState};
use dextt_core::crypto::{generate_keypair, seed_from_label, KeyPair};
use dextt_core::protocol::{make_poi, ProofOfIntent, Timestamp, Transaction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn key(label: &str) -> KeyPair {
    generate_keypair(seed_from_label(label.as_bytes()))
}

/// Transactions stamped with the time at which they are applied. Phases are
/// applied in order; inside a phase any order respects the preconditions.
pub struct TxSet {
    pub genesis: Vec<(KeyPair, u64)>,
    pub phases: Vec<(Timestamp, Vec<Transaction>)>,
}

impl TxSet {
    pub fn fresh_state(&self) -> ChainState {
        ChainState::new(ChainId(0), self.genesis.iter().map(|(k, b)| (k.public(), *b)), 1)
    }

    /// Applies the set with each phase shuffled by `rng`; every transaction must succeed.
    pub fn apply_shuffled(&self, rng: &mut ChaCha8Rng) -> ChainState {
        let mut st = self.fresh_state();
        for (now, txs) in &self.phases {
            let mut txs: Vec<&Transaction> = txs.iter().collect();
            txs.shuffle(rng);
            for tx in txs {
                st.apply(tx, *now).unwrap_or_else(|e| panic!("{} at {now}: {e}", tx.summary()));
            }
        }
        st
    }
}

/// Funded senders with disjoint-window transfers, each claimed by its
/// recipient and contested by a random subset of observers, then finalized.
pub fn random_tx_set(seed: u64) -> TxSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let senders: Vec<KeyPair> = (0..rng.gen_range(2..=5)).map(|i| key(&format!("{seed}:s{i}"))).collect();
    let observers: Vec<KeyPair> = (0..rng.gen_range(1..=5)).map(|i| key(&format!("{seed}:o{i}"))).collect();
    let recipients: Vec<KeyPair> = (0..3).map(|i| key(&format!("{seed}:r{i}"))).collect();

    let mut genesis = Vec::new();
    let mut early = Vec::new();
    let mut late = Vec::new();
    for (i, s) in senders.iter().enumerate() {
        let balance = rng.gen_range(20..=100u64);
        let mut left = balance;
        let mut t0 = 1;
        for _ in 0..rng.gen_range(1..=3) {
            if left < 2 {
                break;
            }
            let amount = rng.gen_range(2..=left.min(40));
            left -= amount;
            let t1 = t0 + rng.gen_range(20..=60);
            // Senders also pay each other, so finalize order moves funds around.
            let to = if i > 0 && rng.gen_bool(0.3) { &senders[i - 1] } else { &recipients[rng.gen_range(0..3)] };
            let poi: ProofOfIntent = make_poi(s, to, amount, t0, t1, 1).unwrap();
            early.push(Transaction::claim(poi.clone(), to));
            for o in observers.iter().filter(|_| rng.gen_bool(0.7)) {
                early.push(Transaction::contest(poi.clone(), o));
            }
            late.push(Transaction::finalize(poi.alpha, to));
            t0 = t1 + 1;
        }
        genesis.push((s.clone(), balance));
    }
    TxSet { genesis, phases: vec![(0, early), (1_000, late)] }
}

/// A sender with two overlapping proofs, both discovered, vetoed by several
/// watchdogs and finalized after the deadline. `a_first` picks which proof the
/// chain learns first.
pub fn veto_scenario(seed: u64, a_first: bool, shuffle: u64) -> ChainState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = key(&format!("{seed}:adv"));
    let (da, db) = (key(&format!("{seed}:da")), key(&format!("{seed}:db")));
    let balance = rng.gen_range(10..=100u64);
    let a = make_poi(&s, &da, rng.gen_range(2..=balance), 1, rng.gen_range(30..=90), 1).unwrap();
    let t0 = rng.gen_range(1..=20);
    let b = make_poi(&s, &db, rng.gen_range(2..=balance), t0, t0 + rng.gen_range(30..=90), 1).unwrap();
    let watchdogs: Vec<KeyPair> = (0..rng.gen_range(1..=4)).map(|i| key(&format!("{seed}:w{i}"))).collect();

    let mut st = ChainState::new(ChainId(0), [(s.public(), balance)], 1);
    let (known, other, poster) = if a_first { (&a, &b, &da) } else { (&b, &a, &db) };
    st.apply(&Transaction::claim(known.clone(), poster), 0).unwrap();
    let mut order: Vec<&KeyPair> = watchdogs.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
    for w in order {
        st.apply(&Transaction::veto(known, other.clone(), w), 0).unwrap();
    }
    let deadline = a.intent.t1.max(b.intent.t1) + a.intent.validity_length().max(b.intent.validity_length());
    st.apply(&Transaction::finalize_veto(a.alpha, b.alpha, &watchdogs[0]), deadline + 1).unwrap();
    st
}
