//! Uniswap-V2-family factory and pair event decoding, and per-pool timelines.
//!
//! Layouts follow the V2 core ABI:
//! - `PairCreated(token0 indexed, token1 indexed, pair, uint)`
//! - `Mint(sender indexed, amount0, amount1)`
//! - `Burn(sender indexed, amount0, amount1, to indexed)`
//! - `Swap(sender indexed, amount0In, amount1In, amount0Out, amount1Out, to indexed)`
//!
//! `Mint` and `Burn` carry no LP amount. It is read from the pair's own LP
//! `Transfer` logs in the same transaction: transfers from the zero address
//! to a non-zero holder are minted liquidity, transfers from a non-zero
//! holder to the zero address are burned liquidity.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::chain::{tx_fee, Address, BlockRef, EventTopics, Hash32, LogRecord, Topic};
use crate::tables::Table;
use crate::tokens::last_log_blocks;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("expected topic0 {expected}, found {found}")]
    WrongTopic { expected: Topic, found: Topic },
    #[error("malformed {event} log: bad {field}")]
    Malformed { event: &'static str, field: &'static str },
    #[error("{event} invariant violated: {detail}")]
    Invariant { event: &'static str, detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub pool: Address,
    pub factory: Address,
    pub creator: Address,
    pub token0: Address,
    pub token1: Address,
    pub created_block: BlockRef,
    pub created_index: u64,
    pub tx_hash: Hash32,
    pub last_event_block: BlockRef,
    pub gas_used: u64,
    pub gas_price: u64,
}

impl PoolRecord {
    pub fn fee(&self) -> Amount {
        tx_fee(self.gas_used, self.gas_price)
    }

    pub fn other(&self, token: Address) -> Option<Address> {
        if token == self.token0 {
            Some(self.token1)
        } else if token == self.token1 {
            Some(self.token0)
        } else {
            None
        }
    }
}

/// Transaction context shared by every pair event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMeta {
    pub pool: Address,
    pub block: BlockRef,
    pub index: u64,
    pub tx_hash: Hash32,
    pub tx_sender: Address,
    pub gas_used: u64,
    pub gas_price: u64,
}

impl EventMeta {
    fn of(log: &LogRecord) -> Self {
        EventMeta {
            pool: log.emitter,
            block: log.block,
            index: log.index,
            tx_hash: log.tx_hash,
            tx_sender: log.tx_sender,
            gas_used: log.gas_used,
            gas_price: log.gas_price,
        }
    }

    pub fn fee(&self) -> Amount {
        tx_fee(self.gas_used, self.gas_price)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintEvent {
    #[serde(flatten)]
    pub meta: EventMeta,
    pub lp_amount: Amount,
    pub amount0: Amount,
    pub amount1: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurnEvent {
    #[serde(flatten)]
    pub meta: EventMeta,
    pub lp_amount: Amount,
    pub amount0: Amount,
    pub amount1: Amount,
    pub to: Address,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEvent {
    #[serde(flatten)]
    pub meta: EventMeta,
    pub amount0_in: Amount,
    pub amount1_in: Amount,
    pub amount0_out: Amount,
    pub amount1_out: Amount,
    pub to: Address,
}

impl SwapEvent {
    /// True when token0 is paid in (and token1 paid out).
    pub fn token0_in(&self) -> bool {
        !self.amount0_in.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolEvent {
    Mint(MintEvent),
    Burn(BurnEvent),
    Swap(SwapEvent),
}

impl PoolEvent {
    pub fn meta(&self) -> &EventMeta {
        match self {
            PoolEvent::Mint(e) => &e.meta,
            PoolEvent::Burn(e) => &e.meta,
            PoolEvent::Swap(e) => &e.meta,
        }
    }

    pub fn pool(&self) -> Address {
        self.meta().pool
    }

    pub fn order_key(&self) -> (u64, u64) {
        (self.meta().block.number, self.meta().index)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PoolEvent::Mint(_) => "mint",
            PoolEvent::Burn(_) => "burn",
            PoolEvent::Swap(_) => "swap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolTimeline {
    pub record: PoolRecord,
    pub events: Vec<PoolEvent>,
}

impl PoolTimeline {
    pub fn mints(&self) -> impl Iterator<Item = &MintEvent> {
        self.events.iter().filter_map(|e| match e {
            PoolEvent::Mint(m) => Some(m),
            _ => None,
        })
    }

    pub fn burns(&self) -> impl Iterator<Item = &BurnEvent> {
        self.events.iter().filter_map(|e| match e {
            PoolEvent::Burn(b) => Some(b),
            _ => None,
        })
    }

    pub fn swaps(&self) -> impl Iterator<Item = &SwapEvent> {
        self.events.iter().filter_map(|e| match e {
            PoolEvent::Swap(s) => Some(s),
            _ => None,
        })
    }
}

fn check_topic(log: &LogRecord, expected: Topic) -> Result<(), DecodeError> {
    if log.topic0 != expected {
        return Err(DecodeError::WrongTopic { expected, found: log.topic0 });
    }
    Ok(())
}

fn topic_address(log: &LogRecord, i: usize, event: &'static str, field: &'static str) -> Result<Address, DecodeError> {
    log.indexed_topics
        .get(i)
        .and_then(|t| Address::from_word(&t.0))
        .ok_or(DecodeError::Malformed { event, field })
}

fn word_amount(log: &LogRecord, i: usize, event: &'static str, field: &'static str) -> Result<Amount, DecodeError> {
    log.data_word(i).map(Amount::from_word).ok_or(DecodeError::Malformed { event, field })
}

pub fn decode_pair_created(log: &LogRecord) -> Result<PoolRecord, DecodeError> {
    const EV: &str = "PairCreated";
    check_topic(log, EventTopics::get().pair_created)?;
    let token0 = topic_address(log, 0, EV, "token0")?;
    let token1 = topic_address(log, 1, EV, "token1")?;
    let pool = log
        .data_word(0)
        .and_then(Address::from_word)
        .ok_or(DecodeError::Malformed { event: EV, field: "pair" })?;
    if token0 == token1 {
        return Err(DecodeError::Invariant { event: EV, detail: format!("token0 == token1 ({token0})") });
    }
    Ok(PoolRecord {
        pool,
        factory: log.emitter,
        creator: log.tx_sender,
        token0,
        token1,
        created_block: log.block,
        created_index: log.index,
        tx_hash: log.tx_hash,
        last_event_block: log.block,
        gas_used: log.gas_used,
        gas_price: log.gas_price,
    })
}

fn positive_lp(event: &'static str, lp_amount: Amount) -> Result<Amount, DecodeError> {
    if lp_amount.is_zero() {
        return Err(DecodeError::Invariant { event, detail: "zero LP amount".into() });
    }
    Ok(lp_amount)
}

/// Decodes a `Mint`; `lp_amount` comes from the LP transfers of the transaction.
pub fn decode_mint(log: &LogRecord, lp_amount: Amount) -> Result<MintEvent, DecodeError> {
    const EV: &str = "Mint";
    check_topic(log, EventTopics::get().mint)?;
    topic_address(log, 0, EV, "sender")?;
    Ok(MintEvent {
        meta: EventMeta::of(log),
        amount0: word_amount(log, 0, EV, "amount0")?,
        amount1: word_amount(log, 1, EV, "amount1")?,
        lp_amount: positive_lp(EV, lp_amount)?,
    })
}

pub fn decode_burn(log: &LogRecord, lp_amount: Amount) -> Result<BurnEvent, DecodeError> {
    const EV: &str = "Burn";
    check_topic(log, EventTopics::get().burn)?;
    topic_address(log, 0, EV, "sender")?;
    Ok(BurnEvent {
        meta: EventMeta::of(log),
        to: topic_address(log, 1, EV, "to")?,
        amount0: word_amount(log, 0, EV, "amount0")?,
        amount1: word_amount(log, 1, EV, "amount1")?,
        lp_amount: positive_lp(EV, lp_amount)?,
    })
}

pub fn decode_swap(log: &LogRecord) -> Result<SwapEvent, DecodeError> {
    const EV: &str = "Swap";
    check_topic(log, EventTopics::get().swap)?;
    topic_address(log, 0, EV, "sender")?;
    let s = SwapEvent {
        meta: EventMeta::of(log),
        to: topic_address(log, 1, EV, "to")?,
        amount0_in: word_amount(log, 0, EV, "amount0In")?,
        amount1_in: word_amount(log, 1, EV, "amount1In")?,
        amount0_out: word_amount(log, 2, EV, "amount0Out")?,
        amount1_out: word_amount(log, 3, EV, "amount1Out")?,
    };
    let forward = !s.amount0_in.is_zero() && s.amount1_in.is_zero() && s.amount0_out.is_zero() && !s.amount1_out.is_zero();
    let backward = s.amount0_in.is_zero() && !s.amount1_in.is_zero() && !s.amount0_out.is_zero() && s.amount1_out.is_zero();
    if !forward && !backward {
        return Err(DecodeError::Invariant {
            event: EV,
            detail: "expected one input side and the opposite output side".into(),
        });
    }
    Ok(s)
}

/// Decoding failure for one log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogError {
    pub block: u64,
    pub index: u64,
    pub error: DecodeError,
}

#[derive(Clone, Debug, Default)]
pub struct PoolIndex {
    /// Pools in address order.
    pub pools: Vec<PoolRecord>,
    /// Decoded events in (block, index) order.
    pub events: Vec<PoolEvent>,
    pub errors: Vec<LogError>,
    /// Repeated `PairCreated` for an already-known pair address.
    pub duplicate_pairs: Vec<Address>,
}

impl PoolIndex {
    pub fn factory_counts(&self) -> BTreeMap<Address, usize> {
        let mut out = BTreeMap::new();
        for p in &self.pools {
            *out.entry(p.factory).or_insert(0) += 1;
        }
        out
    }

    pub fn count(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.kind() == kind).count()
    }
}

enum Pending<'a> {
    Pair(&'a LogRecord),
    Mint(&'a LogRecord, Amount),
    Burn(&'a LogRecord, Amount),
    Swap(&'a LogRecord),
}

enum Decoded {
    Pair(PoolRecord),
    Event(PoolEvent),
}

/// Decodes every factory and pair event in `logs` (which must be in
/// (block, index) order).
pub fn index_logs(logs: &[LogRecord]) -> PoolIndex {
    let t = EventTopics::get();
    let mut pending = Vec::new();
    // LP minted / burned per emitter within the current transaction.
    let mut lp: HashMap<Address, (Amount, Amount)> = HashMap::new();
    let mut current_tx: Option<Hash32> = None;
    for log in logs {
        if current_tx != Some(log.tx_hash) {
            current_tx = Some(log.tx_hash);
            lp.clear();
        }
        if log.topic0 == t.transfer {
            let (Some(from), Some(to), Some(value)) = (
                log.indexed_topics.first().and_then(|w| Address::from_word(&w.0)),
                log.indexed_topics.get(1).and_then(|w| Address::from_word(&w.0)),
                log.data_word(0),
            ) else {
                continue;
            };
            let entry = lp.entry(log.emitter).or_default();
            if from.is_zero() && !to.is_zero() {
                entry.0 += Amount::from_word(value);
            } else if to.is_zero() && !from.is_zero() {
                entry.1 += Amount::from_word(value);
            }
        } else if log.topic0 == t.pair_created {
            pending.push(Pending::Pair(log));
        } else if log.topic0 == t.mint {
            let amount = lp.get_mut(&log.emitter).map(|e| std::mem::take(&mut e.0)).unwrap_or_default();
            pending.push(Pending::Mint(log, amount));
        } else if log.topic0 == t.burn {
            let amount = lp.get_mut(&log.emitter).map(|e| std::mem::take(&mut e.1)).unwrap_or_default();
            pending.push(Pending::Burn(log, amount));
        } else if log.topic0 == t.swap {
            pending.push(Pending::Swap(log));
        }
    }

    let decoded: Vec<(u64, u64, Result<Decoded, DecodeError>)> = pending
        .into_par_iter()
        .map(|p| {
            let (log, r) = match p {
                Pending::Pair(l) => (l, decode_pair_created(l).map(Decoded::Pair)),
                Pending::Mint(l, a) => (l, decode_mint(l, a).map(|e| Decoded::Event(PoolEvent::Mint(e)))),
                Pending::Burn(l, a) => (l, decode_burn(l, a).map(|e| Decoded::Event(PoolEvent::Burn(e)))),
                Pending::Swap(l) => (l, decode_swap(l).map(|e| Decoded::Event(PoolEvent::Swap(e)))),
            };
            (log.block.number, log.index, r)
        })
        .collect();

    let mut pools: BTreeMap<Address, PoolRecord> = BTreeMap::new();
    let mut duplicate_pairs = Vec::new();
    let mut events = Vec::new();
    let mut errors = Vec::new();
    for (block, index, r) in decoded {
        match r {
            Ok(Decoded::Pair(p)) => {
                if let std::collections::btree_map::Entry::Vacant(e) = pools.entry(p.pool) {
                    e.insert(p);
                } else {
                    duplicate_pairs.push(p.pool);
                }
            }
            Ok(Decoded::Event(e)) => events.push(e),
            Err(error) => errors.push(LogError { block, index, error }),
        }
    }
    let last = last_log_blocks(logs.iter().filter(|l| pools.contains_key(&l.emitter)));
    for p in pools.values_mut() {
        if let Some(b) = last.get(&p.pool) {
            if b.number > p.last_event_block.number {
                p.last_event_block = *b;
            }
        }
    }
    PoolIndex { pools: pools.into_values().collect(), events, errors, duplicate_pairs }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrphanReason {
    UnknownPool,
    BeforeCreation,
}

impl OrphanReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrphanReason::UnknownPool => "unknown_pool",
            OrphanReason::BeforeCreation => "before_creation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orphan {
    pub event: PoolEvent,
    pub reason: OrphanReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Timelines {
    pub timelines: BTreeMap<Address, PoolTimeline>,
    pub orphans: Vec<Orphan>,
}

/// Groups events per pool and sorts them by (block, log index).
///
/// Events for pools without a `PairCreated` record, or placed before it,
/// are returned as orphans.
pub fn assemble_timelines(pools: &[PoolRecord], events: impl IntoIterator<Item = PoolEvent>) -> Timelines {
    let mut timelines: BTreeMap<Address, PoolTimeline> = pools
        .iter()
        .map(|p| (p.pool, PoolTimeline { record: p.clone(), events: Vec::new() }))
        .collect();
    let mut orphans = Vec::new();
    for e in events {
        match timelines.get_mut(&e.pool()) {
            Some(t) if e.order_key() > (t.record.created_block.number, t.record.created_index) => t.events.push(e),
            Some(_) => orphans.push(Orphan { event: e, reason: OrphanReason::BeforeCreation }),
            None => orphans.push(Orphan { event: e, reason: OrphanReason::UnknownPool }),
        }
    }
    timelines.par_iter_mut().for_each(|(_, t)| t.events.sort_by_key(PoolEvent::order_key));
    orphans.sort_by_key(|a| (a.event.pool(), a.event.order_key()));
    Timelines { timelines, orphans }
}

pub fn pools_table(pools: &[PoolRecord], labels: &BTreeMap<Address, String>) -> Table {
    let mut t = Table::new(&[
        "pool", "factory", "factory_label", "creator", "token0", "token1", "created_block", "created_timestamp",
        "last_event_block", "lifetime_blocks", "gas_used", "gas_price",
    ]);
    for p in pools {
        t.push(vec![
            p.pool.to_string(),
            p.factory.to_string(),
            labels.get(&p.factory).cloned().unwrap_or_default(),
            p.creator.to_string(),
            p.token0.to_string(),
            p.token1.to_string(),
            p.created_block.number.to_string(),
            p.created_block.timestamp.map(|t| t.to_string()).unwrap_or_default(),
            p.last_event_block.number.to_string(),
            (p.last_event_block.number - p.created_block.number).to_string(),
            p.gas_used.to_string(),
            p.gas_price.to_string(),
        ]);
    }
    t
}

fn meta_cells(m: &EventMeta) -> Vec<String> {
    vec![
        m.pool.to_string(),
        m.block.number.to_string(),
        m.index.to_string(),
        m.tx_hash.to_string(),
        m.tx_sender.to_string(),
        m.gas_used.to_string(),
        m.gas_price.to_string(),
    ]
}

const META_COLS: [&str; 7] = ["pool", "block", "index", "tx_hash", "tx_sender", "gas_used", "gas_price"];

/// One table per event kind: `(mint, burn, swap)`.
pub fn event_tables(events: &[PoolEvent]) -> (Table, Table, Table) {
    let cols = |extra: &[&str]| {
        let mut h: Vec<&str> = META_COLS.to_vec();
        h.extend_from_slice(extra);
        Table::new(&h)
    };
    let mut mint = cols(&["lp_amount", "amount0", "amount1"]);
    let mut burn = cols(&["lp_amount", "amount0", "amount1", "to"]);
    let mut swap = cols(&["amount0_in", "amount1_in", "amount0_out", "amount1_out", "to"]);
    for e in events {
        let mut row = meta_cells(e.meta());
        match e {
            PoolEvent::Mint(m) => {
                row.extend([m.lp_amount.to_string(), m.amount0.to_string(), m.amount1.to_string()]);
                mint.push(row);
            }
            PoolEvent::Burn(b) => {
                row.extend([b.lp_amount.to_string(), b.amount0.to_string(), b.amount1.to_string(), b.to.to_string()]);
                burn.push(row);
            }
            PoolEvent::Swap(s) => {
                row.extend([
                    s.amount0_in.to_string(),
                    s.amount1_in.to_string(),
                    s.amount0_out.to_string(),
                    s.amount1_out.to_string(),
                    s.to.to_string(),
                ]);
                swap.push(row);
            }
        }
    }
    (mint, burn, swap)
}

pub fn factories_table(index: &PoolIndex, labels: &BTreeMap<Address, String>) -> Table {
    let counts = index.factory_counts();
    let total: usize = counts.values().sum();
    let mut rows: Vec<(Address, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut t = Table::new(&["factory", "label", "pools", "share"]);
    for (f, n) in rows {
        t.push(vec![
            f.to_string(),
            labels.get(&f).cloned().unwrap_or_default(),
            n.to_string(),
            crate::tables::fmt_f64(n as f64 / total as f64),
        ]);
    }
    t
}

pub fn orphans_table(orphans: &[Orphan]) -> Table {
    let mut t = Table::new(&["kind", "pool", "block", "index", "tx_hash", "reason"]);
    for o in orphans {
        let m = o.event.meta();
        t.push(vec![
            o.event.kind().into(),
            m.pool.to_string(),
            m.block.number.to_string(),
            m.index.to_string(),
            m.tx_hash.to_string(),
            o.reason.as_str().into(),
        ]);
    }
    t
}

/// Log builders for the V2 layouts, shared by the simulator and tests.
pub mod encode {
    use super::*;
    use crate::chain::Bytes;

    fn words(amounts: &[&Amount]) -> Bytes {
        let mut out = Vec::with_capacity(32 * amounts.len());
        for a in amounts {
            out.extend_from_slice(&a.to_word().expect("amount fits in a word"));
        }
        Bytes(out)
    }

    /// A log with placeholder transaction context; callers fill block,
    /// index and transaction fields.
    fn log(emitter: Address, topic0: Topic, indexed: Vec<Hash32>, data: Bytes) -> LogRecord {
        LogRecord {
            emitter,
            block: BlockRef::new(0),
            index: 0,
            tx_hash: Hash32::default(),
            tx_sender: Address::ZERO,
            topic0,
            indexed_topics: indexed,
            data,
            gas_used: 0,
            gas_price: 0,
        }
    }

    pub fn transfer(token: Address, from: Address, to: Address, value: &Amount) -> LogRecord {
        log(token, EventTopics::get().transfer, vec![from.to_word(), to.to_word()], words(&[value]))
    }

    pub fn pair_created(factory: Address, token0: Address, token1: Address, pair: Address, n: u64) -> LogRecord {
        let mut data = pair.to_word().0.to_vec();
        data.extend_from_slice(&Amount::from(n).to_word().expect("u64 fits"));
        log(factory, EventTopics::get().pair_created, vec![token0.to_word(), token1.to_word()], Bytes(data))
    }

    pub fn mint(pair: Address, sender: Address, amount0: &Amount, amount1: &Amount) -> LogRecord {
        log(pair, EventTopics::get().mint, vec![sender.to_word()], words(&[amount0, amount1]))
    }

    pub fn burn(pair: Address, sender: Address, amount0: &Amount, amount1: &Amount, to: Address) -> LogRecord {
        log(pair, EventTopics::get().burn, vec![sender.to_word(), to.to_word()], words(&[amount0, amount1]))
    }

    pub fn swap(pair: Address, sender: Address, amounts: [&Amount; 4], to: Address) -> LogRecord {
        log(pair, EventTopics::get().swap, vec![sender.to_word(), to.to_word()], words(&amounts))
    }
}
