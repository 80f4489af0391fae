//! Discrete-event engine that binds chains, clients, observers and watchdogs
//! to one global clock, plus the cross-chain consistency checks.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{client_step, observer_step, watchdog_step, ClientDecision, SimTime};
use crate::chain::{BlockLogLine, Chain};
use crate::config::{ConfigError, EcosystemConfig};
use crate::contract::{Applied, ChainId, ChainState, ContractError, PoiStatus, SupplyReport, VetoStatus};
use crate::crypto::{self, contest_rank, generate_keypair, seed_from_label, KeyPair, Signature, WalletId};
use crate::protocol::{conflicts, make_poi, veto_deadline, Amount, ProofOfIntent, Timestamp, Transaction, TxKind, VetoKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inconsistency {
    pub wallet: WalletId,
    pub balances: Vec<(ChainId, Amount)>,
}

/// One entry for every wallet whose balance is not identical on all chains.
pub fn check_consistency(states: &[ChainState]) -> Vec<Inconsistency> {
    let mut wallets: Vec<WalletId> = states.iter().flat_map(|s| s.balances().keys().copied()).collect();
    wallets.sort();
    wallets.dedup();
    wallets
        .into_iter()
        .filter_map(|wallet| {
            let balances: Vec<(ChainId, Amount)> = states.iter().map(|s| (s.chain_id, s.balance(&wallet))).collect();
            let divergent = balances.windows(2).any(|w| w[0].1 != w[1].1);
            divergent.then_some(Inconsistency { wallet, balances })
        })
        .collect()
}

pub fn count_corrupted(report: &RunReport) -> usize {
    report.transfers.iter().filter(|t| t.corrupted).count()
}

/// Value held by the most chains; ties go to the lowest chain.
fn majority(values: &[Amount]) -> Amount {
    let mut best = (0, values[0]);
    for &v in values {
        let count = values.iter().filter(|&&x| x == v).count();
        if count > best.0 {
            best = (count, v);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Client,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferEntry {
    pub alpha: String,
    pub origin: Origin,
    pub sender: String,
    pub recipient: String,
    pub amount: Amount,
    pub t0: Timestamp,
    pub t1: Timestamp,
    pub claim_chain: u32,
    /// Per chain: "finalized", "pending", "vetoed" or "unknown".
    pub status: Vec<String>,
    pub winners: Vec<Option<String>>,
    pub contests: Vec<usize>,
    pub corrupted: bool,
    /// Sender and recipient are the same wallet; allowed, but worth a look.
    pub self_transfer: bool,
}

impl TransferEntry {
    pub fn finalized_on(&self) -> usize {
        self.status.iter().filter(|s| *s == "finalized").count()
    }

    pub fn finalized_anywhere(&self) -> bool {
        self.finalized_on() > 0
    }

    pub fn finalized_everywhere(&self) -> bool {
        self.finalized_on() == self.status.len()
    }

    /// Reward recipient on the first chain that finalized the transfer.
    pub fn winner(&self) -> Option<&str> {
        self.status
            .iter()
            .zip(&self.winners)
            .find(|(s, _)| *s == "finalized")
            .and_then(|(_, w)| w.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub alpha: String,
    pub sender: String,
    pub recipient: String,
    pub amount: Amount,
    pub t0: Timestamp,
    pub t1: Timestamp,
    pub winner: String,
    pub contests: String,
    pub corrupted: bool,
}

pub const LEDGER_HEADER: [&str; 9] = ["alpha", "sender", "recipient", "amount", "t0", "t1", "winner", "contests", "corrupted"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VetoEntry {
    pub pair: String,
    pub sender: String,
    pub deadline: Timestamp,
    /// Per chain: "open", "finalized" or "absent".
    pub status: Vec<String>,
    pub winners: Vec<Option<String>>,
    pub burned_amount: Vec<Amount>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TxCount {
    pub included: u64,
    pub ok: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub chain_id: u32,
    pub height: u64,
    pub balances: BTreeMap<String, Amount>,
    pub burned: Amount,
    pub supply: SupplyReport,
    pub transactions: BTreeMap<String, TxCount>,
    pub errors: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedInconsistency {
    pub wallet: String,
    pub balances: Vec<Amount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContestStats {
    /// Transfers finalized on every chain.
    pub transfers: usize,
    pub mean_per_chain: f64,
    pub max_per_chain: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub chain_count: usize,
    pub validity_length: Timestamp,
    pub duration: Timestamp,
    pub end_time_ms: SimTime,
    pub wallets: BTreeMap<String, String>,
    pub chains: Vec<ChainSummary>,
    pub transfers: Vec<TransferEntry>,
    pub vetoes: Vec<VetoEntry>,
    pub corrupted: usize,
    /// Wallet balances overwritten while re-synchronizing after corruption.
    pub resyncs: usize,
    pub inconsistencies: Vec<NamedInconsistency>,
    pub contest_stats: ContestStats,
    pub tx_totals: BTreeMap<String, TxCount>,
}

impl RunReport {
    pub fn ledger_rows(&self) -> Vec<LedgerRow> {
        self.transfers
            .iter()
            .map(|t| LedgerRow {
                alpha: t.alpha.clone(),
                sender: t.sender.clone(),
                recipient: t.recipient.clone(),
                amount: t.amount,
                t0: t.t0,
                t1: t.t1,
                winner: t.winner().unwrap_or_default().to_string(),
                contests: t.contests.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
                corrupted: t.corrupted,
            })
            .collect()
    }

    /// Named balances and burned supply per chain.
    pub fn balance_snapshot(&self) -> serde_json::Value {
        let chains: BTreeMap<String, serde_json::Value> = self
            .chains
            .iter()
            .map(|c| {
                (
                    ChainId(c.chain_id).to_string(),
                    serde_json::json!({ "balances": c.balances, "burned": c.burned }),
                )
            })
            .collect();
        serde_json::json!({ "chains": chains })
    }

    pub fn all_conserved(&self) -> bool {
        self.chains.iter().all(|c| c.supply.conserved)
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub states: Vec<ChainState>,
    pub block_log: Vec<BlockLogLine>,
}

/// Runs one ecosystem to quiescence.
pub fn run(config: &EcosystemConfig) -> Result<RunOutcome, ConfigError> {
    config.validate()?;
    let mut engine = Engine::new(config)?;
    engine.run();
    Ok(engine.finish())
}

enum Event {
    Block { chain: usize },
    ClientAction { client: usize },
    ScriptedTransfer { index: usize },
    ObserverDecide { observer: usize, alpha: Signature, chain: usize },
    WatchdogVeto { watchdog: usize, key: VetoKey, chain: usize },
    Submit { chain: usize, tx: Box<Transaction> },
    SettleCheck { transfer: usize },
}

struct Scheduled {
    at: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

struct Participant {
    name: String,
    key: KeyPair,
}

struct ClientState {
    wallet: usize,
    busy_until: Option<SimTime>,
}

struct SeenPoi {
    poi: ProofOfIntent,
    /// Each observer's ω for this proof, by observer index.
    omegas: Vec<Signature>,
}

struct TransferTrack {
    poi: ProofOfIntent,
    origin: Origin,
    claim_chain: usize,
    settled: bool,
    corrupted: bool,
}

struct VetoTrack {
    a: ProofOfIntent,
    b: ProofOfIntent,
    deadline: Timestamp,
}

struct Engine<'c> {
    cfg: &'c EcosystemConfig,
    rng: ChaCha8Rng,
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    pending_other: usize,
    chains: Vec<Chain>,
    participants: Vec<Participant>,
    by_name: BTreeMap<String, usize>,
    names: BTreeMap<WalletId, String>,
    clients: Vec<ClientState>,
    observers: Vec<usize>,
    seen: BTreeMap<Signature, SeenPoi>,
    by_sender: BTreeMap<WalletId, Vec<Signature>>,
    transfers: Vec<TransferTrack>,
    vetoes: BTreeMap<VetoKey, VetoTrack>,
    tx_counts: Vec<BTreeMap<TxKind, TxCount>>,
    errors: Vec<BTreeMap<&'static str, u64>>,
    resyncs: usize,
}

impl<'c> Engine<'c> {
    fn new(cfg: &'c EcosystemConfig) -> Result<Self, ConfigError> {
        let mut participants = Vec::new();
        let mut genesis = Vec::new();
        for w in &cfg.wallets {
            let key = w.keypair()?;
            genesis.push((key.public(), w.balance));
            participants.push(Participant { name: w.name.clone(), key });
        }
        let mut clients = Vec::new();
        for i in 0..cfg.clients.count {
            let key = generate_keypair(seed_from_label(format!("run:{}:client-{i}", cfg.seed).as_bytes()));
            genesis.push((key.public(), cfg.clients.initial_balance));
            clients.push(ClientState { wallet: participants.len(), busy_until: None });
            participants.push(Participant { name: format!("client-{i}"), key });
        }
        let mut observers: Vec<usize> = cfg
            .wallets
            .iter()
            .enumerate()
            .filter(|(_, w)| w.observer)
            .map(|(i, _)| i)
            .collect();
        for i in 0..cfg.observers.count {
            let key = generate_keypair(seed_from_label(format!("run:{}:observer-{i}", cfg.seed).as_bytes()));
            observers.push(participants.len());
            participants.push(Participant { name: format!("observer-{i}"), key });
        }

        let mut names = BTreeMap::new();
        for p in &participants {
            if names.insert(p.key.public(), p.name.clone()).is_some() {
                return Err(ConfigError::Invalid(format!("wallet {} shares a key with another wallet", p.name)));
            }
        }
        let by_name = participants.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();

        let mut chains = Vec::new();
        for cc in cfg.chain_configs() {
            let state = ChainState::new(cc.chain_id, genesis.iter().copied(), cfg.reward);
            let chain = Chain::new(cc, state)?;
            chains.push(if cfg.block_log { chain.with_block_log() } else { chain });
        }
        let m = chains.len();
        Ok(Engine {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            pending_other: 0,
            chains,
            participants,
            by_name,
            names,
            clients,
            observers,
            seen: BTreeMap::new(),
            by_sender: BTreeMap::new(),
            transfers: Vec::new(),
            vetoes: BTreeMap::new(),
            tx_counts: vec![BTreeMap::new(); m],
            errors: vec![BTreeMap::new(); m],
            resyncs: 0,
        })
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        if !matches!(event, Event::Block { .. }) {
            self.pending_other += 1;
        }
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { at: at.max(self.now), seq: self.seq, event }));
    }

    fn horizon(&self) -> SimTime {
        self.cfg.duration * 1000
    }

    fn block_interval_ms(&self) -> SimTime {
        self.cfg.block_interval * 1000
    }

    fn next_block_gap(&mut self) -> SimTime {
        let base = self.block_interval_ms() as f64;
        if self.cfg.jitter > 0.0 {
            let j = self.cfg.jitter;
            (base * (1.0 + self.rng.gen_range(-j..=j))).round() as SimTime
        } else {
            base as SimTime
        }
    }

    fn skew(&self, chain: usize) -> i64 {
        self.chains[chain].config().clock_skew
    }

    /// Chain-local clock in whole seconds.
    fn chain_clock(&self, chain: usize, at: SimTime) -> i64 {
        (at / 1000) as i64 + self.skew(chain)
    }

    /// Simulation time at which `chain`'s clock reads `ts`.
    fn when_chain_reads(&self, chain: usize, ts: Timestamp) -> SimTime {
        ((ts as i64 - self.skew(chain)).max(0) as SimTime) * 1000
    }

    fn run(&mut self) {
        for c in 0..self.chains.len() {
            let gap = self.next_block_gap();
            self.schedule(gap, Event::Block { chain: c });
        }
        if self.cfg.duration > 0 {
            for c in 0..self.clients.len() {
                let start = self.cfg.clients.sample_think_time(&mut self.rng);
                self.schedule(start, Event::ClientAction { client: c });
            }
        }
        for (index, t) in self.cfg.scripted_transfers.iter().enumerate() {
            let at = secs_f64_to_ms(t.submit_at.unwrap_or(t.t0 as f64));
            self.schedule(at, Event::ScriptedTransfer { index });
        }

        while let Some(Reverse(next)) = self.queue.pop() {
            self.now = next.at;
            if !matches!(next.event, Event::Block { .. }) {
                self.pending_other -= 1;
            }
            match next.event {
                Event::Block { chain } => {
                    if self.quiescent() {
                        break;
                    }
                    self.produce_block(chain);
                    let gap = self.next_block_gap();
                    self.schedule(self.now + gap, Event::Block { chain });
                }
                Event::ClientAction { client } => self.client_action(client),
                Event::ScriptedTransfer { index } => self.scripted_transfer(index),
                Event::ObserverDecide { observer, alpha, chain } => self.observer_decide(observer, alpha, chain),
                Event::WatchdogVeto { watchdog, key, chain } => self.watchdog_veto(watchdog, key, chain),
                Event::Submit { chain, tx } => {
                    self.chains[chain].submit(*tx);
                }
                Event::SettleCheck { transfer } => self.settle_check(transfer),
            }
        }
        for i in 0..self.transfers.len() {
            if !self.transfers[i].settled {
                self.evaluate(i, false);
            }
        }
    }

    fn quiescent(&self) -> bool {
        self.now >= self.horizon() && self.pending_other == 0 && self.chains.iter().all(|c| c.mempool().next().is_none())
    }

    fn produce_block(&mut self, c: usize) {
        let clock = self.chain_clock(c, self.now);
        if clock <= self.chains[c].last_timestamp() as i64 {
            return;
        }
        let produced = self.chains[c]
            .produce_block(clock as Timestamp)
            .expect("timestamp checked above");
        for (tx, result) in produced.block.transactions.iter().zip(&produced.results) {
            let count = self.tx_counts[c].entry(tx.kind()).or_default();
            count.included += 1;
            match result {
                Ok(_) => count.ok += 1,
                Err(e) => *self.errors[c].entry(e.code()).or_default() += 1,
            }
            match (tx, result) {
                (Transaction::Claim(t), Ok(Applied::Claimed { duplicate: false })) => self.observe(&t.poi),
                (Transaction::Contest(t), Ok(Applied::Contested { new_poi: true, .. })) => self.observe(&t.poi),
                (Transaction::Veto(t), Ok(Applied::VetoOpened { .. })) => self.observe(&t.conflicting_poi),
                (_, Err(ContractError::ConflictingPoi { existing, incoming })) => {
                    self.observe(existing);
                    self.observe(incoming);
                }
                _ => {}
            }
        }
    }

    /// A proof appeared on some chain. Observers react to it once, and it is
    /// checked against every other proof seen from the same sender.
    fn observe(&mut self, poi: &ProofOfIntent) {
        if self.seen.contains_key(&poi.alpha) {
            return;
        }
        let encoded = poi.encode();
        let omegas = self
            .observers
            .iter()
            .map(|&o| crypto::sign(&self.participants[o].key, &encoded))
            .collect();
        self.seen.insert(poi.alpha, SeenPoi { poi: poi.clone(), omegas });

        for o in 0..self.observers.len() {
            for c in 0..self.chains.len() {
                if self.chain_clock(c, self.now) < poi.intent.t1 as i64 {
                    let delay = self.cfg.observers.sample_delay(&mut self.rng);
                    self.schedule(self.now + delay, Event::ObserverDecide { observer: o, alpha: poi.alpha, chain: c });
                }
            }
        }

        let sender = poi.intent.sender;
        let earlier: Vec<ProofOfIntent> = self
            .by_sender
            .get(&sender)
            .into_iter()
            .flatten()
            .map(|a| self.seen[a].poi.clone())
            .filter(|q| conflicts(q, poi))
            .collect();
        for q in earlier {
            self.detect_conflict(q, poi.clone());
        }
        self.by_sender.entry(sender).or_default().push(poi.alpha);
    }

    fn detect_conflict(&mut self, a: ProofOfIntent, b: ProofOfIntent) {
        let key = VetoKey::new(a.alpha, b.alpha);
        if self.vetoes.contains_key(&key) {
            return;
        }
        let deadline = veto_deadline(&a, &b).expect("pair conflicts");
        self.vetoes.insert(key, VetoTrack { a, b, deadline });
        if !self.cfg.observers.watchdog || self.observers.is_empty() {
            return;
        }
        for w in 0..self.observers.len() {
            for c in 0..self.chains.len() {
                let delay = self.cfg.observers.sample_delay(&mut self.rng);
                self.schedule(self.now + delay, Event::WatchdogVeto { watchdog: w, key, chain: c });
            }
        }
        let poster = &self.participants[self.observers[0]].key;
        let tx = Transaction::finalize_veto(key.low, key.high, poster);
        for c in 0..self.chains.len() {
            let at = self.when_chain_reads(c, deadline + self.cfg.block_interval);
            self.schedule(at, Event::Submit { chain: c, tx: Box::new(tx.clone()) });
        }
    }

    fn observer_decide(&mut self, observer: usize, alpha: Signature, c: usize) {
        let seen = &self.seen[&alpha];
        if self.chain_clock(c, self.now) >= seen.poi.intent.t1 as i64 {
            return;
        }
        let wallet = self.participants[self.observers[observer]].key.public();
        let chain = &self.chains[c];
        if chain.has_contest_from(&alpha, &wallet) {
            return;
        }
        if chain.state().poi_record(&alpha).is_some_and(|r| r.status != PoiStatus::Pending) {
            return;
        }
        let omega = seen.omegas[observer];
        let own = contest_rank(&omega, &wallet);
        if observer_step(&self.cfg.observers, &own, chain.best_contestant(&alpha).as_ref()) {
            let tx = Transaction::contest_with_omega(seen.poi.clone(), wallet, omega);
            self.chains[c].submit(tx);
        }
    }

    fn watchdog_veto(&mut self, watchdog: usize, key: VetoKey, c: usize) {
        let track = &self.vetoes[&key];
        if self.chain_clock(c, self.now) >= track.deadline as i64 {
            return;
        }
        match watchdog_step(self.chains[c].state(), &track.a, &track.b) {
            Some((known, other)) => {
                let vetoer = &self.participants[self.observers[watchdog]].key;
                let tx = Transaction::veto(known, other.clone(), vetoer);
                self.chains[c].submit(tx);
            }
            None => {
                let retry = self.now + self.block_interval_ms();
                self.schedule(retry, Event::WatchdogVeto { watchdog, key, chain: c });
            }
        }
    }

    fn client_action(&mut self, client: usize) {
        if self.now >= self.horizon() {
            return;
        }
        let wallet = self.clients[client].wallet;
        let id = self.participants[wallet].key.public();
        let balance = self.chains.iter().map(|c| c.state().balance(&id)).min().unwrap_or(0);
        let recipients: Vec<usize> = self
            .clients
            .iter()
            .map(|c| c.wallet)
            .filter(|&w| w != wallet)
            .collect();
        let decision = client_step(
            &self.cfg.clients,
            &mut self.rng,
            self.now,
            self.clients[client].busy_until,
            balance,
            self.cfg.reward,
            &recipients,
            self.chains.len(),
        );
        match decision {
            ClientDecision::Wait { until } => self.schedule(until, Event::ClientAction { client }),
            ClientDecision::Transfer { recipient, amount, t0, claim_chain } => {
                let t1 = t0 + self.cfg.validity_length;
                let settle = self.start_transfer(wallet, recipient, amount, t0, t1, claim_chain, Origin::Client, None);
                let settle = settle.unwrap_or(self.now);
                self.clients[client].busy_until = Some(settle);
                let think = self.cfg.clients.sample_think_time(&mut self.rng);
                self.schedule(settle + think, Event::ClientAction { client });
            }
        }
    }

    fn scripted_transfer(&mut self, index: usize) {
        let t = &self.cfg.scripted_transfers[index];
        let (sender, recipient) = (self.by_name[&t.sender], self.by_name[&t.recipient]);
        let finalize_at = t.finalize_at.map(secs_f64_to_ms);
        self.start_transfer(
            sender,
            recipient,
            t.amount,
            t.t0,
            t.t1,
            t.claim_chain as usize,
            Origin::Scripted,
            finalize_at,
        );
    }

    /// Signs the proof, has the recipient claim it, and schedules the
    /// recipient's finalizes and the settlement check. Returns the settlement time.
    #[allow(clippy::too_many_arguments)]
    fn start_transfer(
        &mut self,
        sender: usize,
        recipient: usize,
        amount: Amount,
        t0: Timestamp,
        t1: Timestamp,
        claim_chain: usize,
        origin: Origin,
        finalize_at: Option<SimTime>,
    ) -> Option<SimTime> {
        let (s, r) = (&self.participants[sender].key, &self.participants[recipient].key);
        let poi = make_poi(s, r, amount, t0, t1, self.cfg.reward).ok()?;
        let claim = Transaction::claim(poi.clone(), r);
        let finalize = Transaction::finalize(poi.alpha, r);
        self.chains[claim_chain].submit(claim);

        let mut last = self.now;
        for c in 0..self.chains.len() {
            let at = finalize_at.unwrap_or_else(|| self.when_chain_reads(c, t1 + self.cfg.block_interval));
            last = last.max(at);
            self.schedule(at, Event::Submit { chain: c, tx: Box::new(finalize.clone()) });
        }
        let settle = last + 3 * self.block_interval_ms();
        let transfer = self.transfers.len();
        self.transfers.push(TransferTrack { poi, origin, claim_chain, settled: false, corrupted: false });
        self.schedule(settle, Event::SettleCheck { transfer });
        Some(settle)
    }

    fn settle_check(&mut self, transfer: usize) {
        let alpha = self.transfers[transfer].poi.alpha;
        let queued = self.chains.iter().any(|c| {
            c.mempool()
                .any(|tx| matches!(tx, Transaction::Finalize(f) if f.alpha == alpha))
        });
        if queued {
            let retry = self.now + self.block_interval_ms();
            self.schedule(retry, Event::SettleCheck { transfer });
            return;
        }
        self.evaluate(transfer, true);
    }

    /// Flags a transfer finalized on only some chains, or with different
    /// winners, and re-synchronizes the wallets it touched.
    fn evaluate(&mut self, transfer: usize, resync: bool) {
        let alpha = self.transfers[transfer].poi.alpha;
        let outcomes: Vec<Option<Option<WalletId>>> = self
            .chains
            .iter()
            .map(|c| {
                c.state()
                    .poi_record(&alpha)
                    .filter(|r| r.status == PoiStatus::Finalized)
                    .map(|r| r.winner)
            })
            .collect();
        let finalized: Vec<Option<WalletId>> = outcomes.iter().flatten().copied().collect();
        let partial = !finalized.is_empty() && finalized.len() < outcomes.len();
        let divergent = finalized.windows(2).any(|w| w[0] != w[1]);
        let corrupted = partial || divergent;

        let track = &mut self.transfers[transfer];
        track.settled = true;
        track.corrupted = corrupted;
        if corrupted && resync {
            let mut wallets = vec![track.poi.intent.sender, track.poi.intent.recipient];
            wallets.extend(finalized.into_iter().flatten());
            wallets.sort();
            wallets.dedup();
            for w in wallets {
                let values: Vec<Amount> = self.chains.iter().map(|c| c.state().balance(&w)).collect();
                let target = majority(&values);
                for (c, &v) in self.chains.iter_mut().zip(&values) {
                    if v != target {
                        c.state_mut().force_balance(w, target);
                        self.resyncs += 1;
                    }
                }
            }
        }
    }

    fn name(&self, wallet: &WalletId) -> String {
        self.names.get(wallet).cloned().unwrap_or_else(|| wallet.short())
    }

    fn finish(self) -> RunOutcome {
        let m = self.chains.len();
        let mut transfers = Vec::new();
        for t in &self.transfers {
            let mut status = Vec::with_capacity(m);
            let mut winners = Vec::with_capacity(m);
            let mut contests = Vec::with_capacity(m);
            for c in &self.chains {
                match c.state().poi_record(&t.poi.alpha) {
                    Some(r) => {
                        status.push(
                            match r.status {
                                PoiStatus::Pending => "pending",
                                PoiStatus::Finalized => "finalized",
                                PoiStatus::Vetoed => "vetoed",
                            }
                            .to_string(),
                        );
                        winners.push(r.winner.map(|w| self.name(&w)));
                        contests.push(r.contestants.len());
                    }
                    None => {
                        status.push("unknown".to_string());
                        winners.push(None);
                        contests.push(0);
                    }
                }
            }
            transfers.push(TransferEntry {
                alpha: t.poi.alpha.to_hex(),
                origin: t.origin,
                sender: self.name(&t.poi.intent.sender),
                recipient: self.name(&t.poi.intent.recipient),
                amount: t.poi.intent.amount,
                self_transfer: t.poi.is_self_transfer(),
                t0: t.poi.intent.t0,
                t1: t.poi.intent.t1,
                claim_chain: t.claim_chain as u32,
                status,
                winners,
                contests,
                corrupted: t.corrupted,
            });
        }

        let vetoes = self
            .vetoes
            .iter()
            .map(|(key, track)| {
                let records: Vec<_> = self.chains.iter().map(|c| c.state().veto_record(key)).collect();
                VetoEntry {
                    pair: key.to_hex(),
                    sender: self.name(&track.a.intent.sender),
                    deadline: track.deadline,
                    status: records
                        .iter()
                        .map(|r| match r.map(|r| r.status) {
                            None => "absent",
                            Some(VetoStatus::Open) => "open",
                            Some(VetoStatus::Finalized) => "finalized",
                        })
                        .map(String::from)
                        .collect(),
                    winners: records
                        .iter()
                        .map(|r| r.and_then(|r| r.winner).map(|w| self.name(&w)))
                        .collect(),
                    burned_amount: records.iter().map(|r| r.map_or(0, |r| r.burned_amount)).collect(),
                }
            })
            .collect();

        let mut tx_totals: BTreeMap<String, TxCount> =
            TxKind::ALL.iter().map(|k| (k.name().to_string(), TxCount::default())).collect();
        let chains: Vec<ChainSummary> = self
            .chains
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let state = c.state();
                let mut transactions = BTreeMap::new();
                for kind in TxKind::ALL {
                    let count = self.tx_counts[i].get(&kind).copied().unwrap_or_default();
                    let total = tx_totals.get_mut(kind.name()).expect("all kinds present");
                    total.included += count.included;
                    total.ok += count.ok;
                    transactions.insert(kind.name().to_string(), count);
                }
                ChainSummary {
                    chain_id: c.id().0,
                    height: c.height(),
                    balances: self
                        .participants
                        .iter()
                        .map(|p| (p.name.clone(), state.balance(&p.key.public())))
                        .collect(),
                    burned: state.burned(),
                    supply: state.audit(),
                    transactions,
                    errors: self.errors[i].iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                }
            })
            .collect();

        let states: Vec<ChainState> = self.chains.iter().map(|c| c.state().clone()).collect();
        let inconsistencies = check_consistency(&states)
            .into_iter()
            .map(|i| NamedInconsistency {
                wallet: self.name(&i.wallet),
                balances: i.balances.iter().map(|(_, b)| *b).collect(),
            })
            .collect();

        let settled: Vec<&TransferEntry> = transfers.iter().filter(|t| t.finalized_everywhere()).collect();
        let per_chain: Vec<usize> = settled.iter().flat_map(|t| t.contests.iter().copied()).collect();
        let contest_stats = ContestStats {
            transfers: settled.len(),
            mean_per_chain: if per_chain.is_empty() {
                0.0
            } else {
                per_chain.iter().sum::<usize>() as f64 / per_chain.len() as f64
            },
            max_per_chain: per_chain.iter().copied().max().unwrap_or(0),
        };

        let block_log = self
            .chains
            .iter()
            .flat_map(|c| c.block_log().unwrap_or_default().iter().cloned())
            .collect();
        let report = RunReport {
            seed: self.cfg.seed,
            chain_count: m,
            validity_length: self.cfg.validity_length,
            duration: self.cfg.duration,
            end_time_ms: self.now,
            wallets: self
                .participants
                .iter()
                .map(|p| (p.name.clone(), p.key.public().to_hex()))
                .collect(),
            corrupted: transfers.iter().filter(|t| t.corrupted).count(),
            chains,
            transfers,
            vetoes,
            resyncs: self.resyncs,
            inconsistencies,
            contest_stats,
            tx_totals,
        };
        RunOutcome { report, states, block_log }
    }
}

fn secs_f64_to_ms(secs: f64) -> SimTime {
    (secs.max(0.0) * 1000.0).round() as SimTime
}
