//! Scripted scenario runner.
//!
//! A scenario is a JSON document: a chain profile, pool defaults and an
//! ordered list of steps. Steps execute in the current block until an
//! `advance_blocks` step moves the clock. Each step is its own transaction
//! unless it sets `join_previous_tx`, in which case it is folded into the
//! previous step's transaction (same sender, gas summed).
//!
//! ```json
//! {"name": "demo", "profile": {...}, "start_timestamp": 1623073234, "fee_bps": 25,
//!  "steps": [
//!   {"action": "create_token", "actor": "eve", "token": "SCAM", "supply": "1e30"},
//!   {"action": "create_pool", "actor": "eve", "pool": "p", "token_a": "SCAM", "token_b": "WBNB"},
//!   {"action": "add_liquidity", "actor": "eve", "pool": "p", "amounts": {"SCAM": "1e30", "WBNB": "5e18"}},
//!   {"action": "advance_blocks", "blocks": 3},
//!   {"action": "swap", "actor": "bob", "pool": "p", "token_in": "WBNB", "amount_in": "1e17"},
//!   {"action": "remove_liquidity", "actor": "eve", "pool": "p", "lp": "all"}]}
//! ```

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::ledger::{ConservationError, Ledger};
use super::math::{proportional, AmmError, PoolState, Side};
use crate::amount::{Amount, SignedAmount};
use crate::chain::{keccak256, signatures as sig, Address, BlockRef, Bytes, ContractCreation, Hash32, LogRecord, TokenMetadata, keccak_selector};
use crate::ingestion::{ChainProfile, FixtureFile, Record};
use crate::pools::encode;
use crate::tokens::{assemble_dispatcher, StandardSpec};

pub const DEFAULT_FEE_BPS: u32 = 30;
pub const DEFAULT_GAS_PRICE: u64 = 5_000_000_000;
pub const MINIMUM_LIQUIDITY: u32 = 1000;

fn default_fee() -> u32 {
    DEFAULT_FEE_BPS
}

fn default_gas_price() -> u64 {
    DEFAULT_GAS_PRICE
}

fn default_decimals() -> u8 {
    18
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Namespaces transaction hashes and token/pool addresses.
    #[serde(default)]
    pub name: String,
    pub profile: ChainProfile,
    /// Timestamp of the first block; without it the fixture carries none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_timestamp: Option<u64>,
    #[serde(default = "default_fee")]
    pub fee_bps: u32,
    /// Lock 1000 LP at the zero address on each pool's first provision.
    #[serde(default)]
    pub lock_minimum_liquidity: bool,
    #[serde(default = "default_gas_price")]
    pub gas_price: u64,
    /// Pre-existing tokens (not created by the scenario). The profile's
    /// wrapped native token is always available as `WBNB` on bsc and `WETH`
    /// elsewhere.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external_tokens: BTreeMap<String, Address>,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_used: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_price: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub join_previous_tx: bool,
    #[serde(flatten)]
    pub action: Action,
}

impl Step {
    pub fn new(actor: &str, action: Action) -> Self {
        Step { actor: actor.to_string(), gas_used: None, gas_price: None, join_previous_tx: false, action }
    }

    pub fn joined(mut self) -> Self {
        self.join_previous_tx = true;
        self
    }

    pub fn gas(mut self, used: u64, price: u64) -> Self {
        self.gas_used = Some(used);
        self.gas_price = Some(price);
        self
    }

    pub fn advance(blocks: u64, seconds: Option<u64>) -> Self {
        Step::new("", Action::AdvanceBlocks { blocks, seconds })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    CreateToken {
        token: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        symbol: Option<String>,
        #[serde(default = "default_decimals")]
        decimals: u8,
        supply: Amount,
        /// False deploys bytecode without `balanceOf` (not a standard token).
        #[serde(default = "default_true")]
        compliant: bool,
    },
    CreatePool {
        pool: String,
        token_a: String,
        token_b: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        factory: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fee_bps: Option<u32>,
    },
    /// Amounts keyed by token label; a missing side is derived from the reserve ratio.
    AddLiquidity { pool: String, amounts: BTreeMap<String, Amount> },
    Swap { pool: String, token_in: String, amount_in: Amount },
    /// A swap that must land in the block of the pool's first liquidity.
    Snipe { pool: String, token_in: String, amount_in: Amount },
    RemoveLiquidity { pool: String, lp: LpAmount },
    Transfer { token: String, to: String, amount: Amount },
    AdvanceBlocks {
        blocks: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seconds: Option<u64>,
    },
}

impl Action {
    fn default_gas(&self) -> u64 {
        match self {
            Action::CreateToken { .. } => 1_250_000,
            Action::CreatePool { .. } => 2_450_000,
            Action::AddLiquidity { .. } => 185_000,
            Action::Swap { .. } | Action::Snipe { .. } => 125_000,
            Action::RemoveLiquidity { .. } => 160_000,
            Action::Transfer { .. } => 52_000,
            Action::AdvanceBlocks { .. } => 0,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Action::CreateToken { .. } => "create_token",
            Action::CreatePool { .. } => "create_pool",
            Action::AddLiquidity { .. } => "add_liquidity",
            Action::Swap { .. } => "swap",
            Action::Snipe { .. } => "snipe",
            Action::RemoveLiquidity { .. } => "remove_liquidity",
            Action::Transfer { .. } => "transfer",
            Action::AdvanceBlocks { .. } => "advance_blocks",
        }
    }
}

/// LP to burn: `"all"` of the actor's balance, an amount, or `{"share_bps": n}` of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpAmount {
    All,
    Amount(Amount),
    ShareBps(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LpRaw {
    Text(String),
    Int(u128),
    Share { share_bps: u32 },
}

impl Serialize for LpAmount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LpAmount::All => LpRaw::Text("all".into()).serialize(s),
            LpAmount::Amount(a) => LpRaw::Text(a.to_string()).serialize(s),
            LpAmount::ShareBps(b) => LpRaw::Share { share_bps: *b }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LpAmount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match LpRaw::deserialize(d)? {
            LpRaw::Text(t) if t == "all" => Ok(LpAmount::All),
            LpRaw::Text(t) => t.parse().map(LpAmount::Amount).map_err(serde::de::Error::custom),
            LpRaw::Int(v) => Ok(LpAmount::Amount(Amount::from(v))),
            LpRaw::Share { share_bps } if share_bps <= 10_000 => Ok(LpAmount::ShareBps(share_bps)),
            LpRaw::Share { share_bps } => Err(serde::de::Error::custom(format!("share_bps {share_bps} above 10000"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("unknown token label {0:?}")]
    UnknownToken(String),
    #[error("unknown pool label {0:?}")]
    UnknownPool(String),
    #[error("label {0:?} already used")]
    Duplicate(String),
    #[error("step needs an actor")]
    MissingActor,
    #[error("token {token:?} is not in pool {pool:?}")]
    NotInPool { token: String, pool: String },
    #[error("liquidity amounts: {0}")]
    Amounts(String),
    #[error("snipe outside the first-liquidity block (liquidity at {liquidity:?}, now {now})")]
    NotInLiquidityBlock { liquidity: Option<u64>, now: u64 },
    #[error("actor holds {held} LP, asked to burn {asked}")]
    InsufficientLp { held: Amount, asked: Amount },
    #[error("joined transaction has sender {previous}, step actor is {actor}")]
    JoinSender { previous: Address, actor: Address },
    #[error("join_previous_tx on the first transaction or across blocks")]
    NothingToJoin,
    #[error("advance_blocks needs blocks > 0")]
    ZeroAdvance,
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Conservation(#[from] ConservationError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("step {step} ({action}): {source}")]
pub struct SimError {
    pub step: usize,
    pub action: &'static str,
    #[source]
    pub source: StepError,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimPool {
    pub address: Address,
    pub token0: Address,
    pub token1: Address,
    pub factory: Address,
    pub created_block: u64,
    pub first_liquidity_block: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub fixture: FixtureFile,
    pub ledger: Ledger,
    pub tokens: BTreeMap<String, Address>,
    pub pools: BTreeMap<String, SimPool>,
    pub actors: BTreeMap<String, Address>,
}

impl SimOutput {
    pub fn token(&self, label: &str) -> Address {
        self.tokens[label]
    }

    pub fn pool(&self, label: &str) -> Address {
        self.pools[label].address
    }

    pub fn actor(&self, label: &str) -> Address {
        self.actors[label]
    }
}

pub fn actor_address(label: &str) -> Address {
    Address::derive(label)
}

pub fn token_address(namespace: &str, label: &str) -> Address {
    Address::derive(&format!("{namespace}/token/{label}"))
}

pub fn factory_address(label: &str) -> Address {
    Address::derive(&format!("factory/{label}"))
}

/// Default factory label per chain.
pub fn default_factory(chain: &str) -> &'static str {
    if chain == "bsc" {
        "pancakeswap-v2"
    } else {
        "uniswap-v2"
    }
}

pub fn native_label(chain: &str) -> &'static str {
    if chain == "bsc" {
        "WBNB"
    } else {
        "WETH"
    }
}

fn token_bytecode(chain: &str, compliant: bool) -> Bytes {
    let mut sels: Vec<_> = StandardSpec::for_chain(chain).all_selectors().into_iter().collect();
    if !compliant {
        let balance_of = keccak_selector(sig::BALANCE_OF);
        sels.retain(|s| *s != balance_of);
    }
    Bytes(assemble_dispatcher(&sels))
}

fn pair_bytecode() -> Bytes {
    let mut sels: Vec<_> = StandardSpec::erc20().all_selectors().into_iter().collect();
    for s in [
        "getReserves()",
        "token0()",
        "token1()",
        "mint(address)",
        "burn(address)",
        "swap(uint256,uint256,address,bytes)",
        "sync()",
        "skim(address)",
    ] {
        sels.push(keccak_selector(s));
    }
    sels.sort();
    Bytes(assemble_dispatcher(&sels))
}

struct Tx {
    hash: Hash32,
    sender: Address,
    gas_used: u64,
    gas_price: u64,
    block: u64,
}

struct PoolSlot {
    info: SimPool,
    state: PoolState,
    lp_balances: HashMap<Address, Amount>,
    /// Running Σ actor flows per side, checked against reserves after each step.
    flow0: SignedAmount,
    flow1: SignedAmount,
}

struct Runner<'a> {
    s: &'a Scenario,
    block: u64,
    timestamp: Option<u64>,
    next_index: u64,
    records: Vec<Record>,
    txs: Vec<Tx>,
    ledger: Ledger,
    tokens: BTreeMap<String, Address>,
    pools: BTreeMap<String, PoolSlot>,
    actors: BTreeMap<String, Address>,
    factory_pairs: HashMap<Address, u64>,
}

impl<'a> Runner<'a> {
    fn block_ref(&self) -> BlockRef {
        BlockRef { number: self.block, timestamp: self.timestamp }
    }

    fn tx(&self) -> &Tx {
        self.txs.last().expect("transaction opened before emitting")
    }

    fn place(&mut self, mut log: LogRecord) {
        let (hash, sender) = (self.tx().hash, self.tx().sender);
        log.block = self.block_ref();
        log.index = self.next_index;
        log.tx_hash = hash;
        log.tx_sender = sender;
        self.next_index += 1;
        self.records.push(Record::Log(log));
    }

    fn create(&mut self, contract: Address, via_internal: bool, bytecode: Bytes, metadata: Option<TokenMetadata>) {
        let (hash, sender) = (self.tx().hash, self.tx().sender);
        self.records.push(Record::Creation(ContractCreation {
            contract,
            deployer: sender,
            block: self.block_ref(),
            index: self.next_index,
            tx_hash: hash,
            via_internal,
            bytecode,
            gas_used: 0,
            gas_price: 0,
            metadata,
        }));
        self.next_index += 1;
    }

    fn token(&self, label: &str) -> Result<Address, StepError> {
        self.tokens.get(label).copied().ok_or_else(|| StepError::UnknownToken(label.to_string()))
    }

    fn pool_mut(&mut self, label: &str) -> Result<&mut PoolSlot, StepError> {
        self.pools.get_mut(label).ok_or_else(|| StepError::UnknownPool(label.to_string()))
    }

    fn open_tx(&mut self, step: &Step, actor: Address) -> Result<(), StepError> {
        let gas_used = step.gas_used.unwrap_or_else(|| step.action.default_gas());
        if step.join_previous_tx {
            let block = self.block;
            let Some(tx) = self.txs.last_mut().filter(|t| t.block == block) else {
                return Err(StepError::NothingToJoin);
            };
            if tx.sender != actor {
                return Err(StepError::JoinSender { previous: tx.sender, actor });
            }
            tx.gas_used += gas_used;
            return Ok(());
        }
        let n = self.txs.len();
        self.txs.push(Tx {
            hash: Hash32(keccak256(format!("{}/tx/{n}", self.s.name).as_bytes())),
            sender: actor,
            gas_used,
            gas_price: step.gas_price.unwrap_or(self.s.gas_price),
            block: self.block,
        });
        Ok(())
    }

    fn step(&mut self, step: &Step) -> Result<(), StepError> {
        if let Action::AdvanceBlocks { blocks, seconds } = &step.action {
            if *blocks == 0 {
                return Err(StepError::ZeroAdvance);
            }
            self.block += blocks;
            if let Some(ts) = self.timestamp.as_mut() {
                *ts += seconds.unwrap_or_else(|| (*blocks as f64 * self.s.profile.mean_block_interval).round() as u64);
            }
            self.next_index = 0;
            return Ok(());
        }
        if step.actor.is_empty() {
            return Err(StepError::MissingActor);
        }
        let actor = actor_address(&step.actor);
        self.actors.insert(step.actor.clone(), actor);
        self.open_tx(step, actor)?;
        match &step.action {
            Action::CreateToken { token, name, symbol, decimals, supply, compliant } => {
                if self.tokens.contains_key(token) {
                    return Err(StepError::Duplicate(token.clone()));
                }
                let addr = token_address(&self.s.name, token);
                self.tokens.insert(token.clone(), addr);
                let meta = TokenMetadata {
                    name: Some(name.clone().unwrap_or_else(|| token.clone())),
                    symbol: Some(symbol.clone().unwrap_or_else(|| token.to_uppercase())),
                    decimals: Some(*decimals),
                    total_supply: Some(supply.clone()),
                };
                self.create(addr, false, token_bytecode(&self.s.profile.name, *compliant), Some(meta));
                if !supply.is_zero() {
                    self.place(encode::transfer(addr, Address::ZERO, actor, supply));
                }
            }
            Action::CreatePool { pool, token_a, token_b, factory, fee_bps } => {
                if self.pools.contains_key(pool) {
                    return Err(StepError::Duplicate(pool.clone()));
                }
                let (a, b) = (self.token(token_a)?, self.token(token_b)?);
                if a == b {
                    return Err(StepError::Amounts(format!("pool {pool:?} pairs {token_a:?} with itself")));
                }
                let (t0, t1) = if a < b { (a, b) } else { (b, a) };
                let factory = factory_address(factory.as_deref().unwrap_or(default_factory(&self.s.profile.name)));
                let pair = Address::derive(&format!("{}/pair/{t0}/{t1}/{pool}", self.s.name));
                let state = PoolState::new(fee_bps.unwrap_or(self.s.fee_bps))?;
                let n = {
                    let c = self.factory_pairs.entry(factory).or_insert(0);
                    *c += 1;
                    *c
                };
                let lp_meta = TokenMetadata {
                    name: Some(if self.s.profile.name == "bsc" { "Pancake LPs" } else { "Uniswap V2" }.into()),
                    symbol: Some(if self.s.profile.name == "bsc" { "Cake-LP" } else { "UNI-V2" }.into()),
                    decimals: Some(18),
                    total_supply: Some(Amount::zero()),
                };
                self.create(pair, true, pair_bytecode(), Some(lp_meta));
                self.place(encode::pair_created(factory, t0, t1, pair, n));
                self.pools.insert(
                    pool.clone(),
                    PoolSlot {
                        info: SimPool {
                            address: pair,
                            token0: t0,
                            token1: t1,
                            factory,
                            created_block: self.block,
                            first_liquidity_block: None,
                        },
                        state,
                        lp_balances: HashMap::new(),
                        flow0: SignedAmount::zero(),
                        flow1: SignedAmount::zero(),
                    },
                );
            }
            Action::AddLiquidity { pool, amounts } => self.add_liquidity(actor, pool, amounts)?,
            Action::Swap { pool, token_in, amount_in } => self.swap(actor, pool, token_in, amount_in)?,
            Action::Snipe { pool, token_in, amount_in } => {
                let liquidity = self.pool_mut(pool)?.info.first_liquidity_block;
                if liquidity != Some(self.block) {
                    return Err(StepError::NotInLiquidityBlock { liquidity, now: self.block });
                }
                self.swap(actor, pool, token_in, amount_in)?;
            }
            Action::RemoveLiquidity { pool, lp } => self.remove_liquidity(actor, pool, lp)?,
            Action::Transfer { token, to, amount } => {
                let t = self.token(token)?;
                let to = actor_address(to);
                self.place(encode::transfer(t, actor, to, amount));
            }
            Action::AdvanceBlocks { .. } => unreachable!("handled above"),
        }
        Ok(())
    }

    fn side_of(&self, pool: &str, token: &str) -> Result<Side, StepError> {
        let addr = self.token(token)?;
        let slot = &self.pools[pool];
        if addr == slot.info.token0 {
            Ok(Side::Token0In)
        } else if addr == slot.info.token1 {
            Ok(Side::Token1In)
        } else {
            Err(StepError::NotInPool { token: token.to_string(), pool: pool.to_string() })
        }
    }

    fn flow(&mut self, actor: Address, pool: &str, delta0: SignedAmount, delta1: SignedAmount) -> Result<(), StepError> {
        let slot = self.pools.get_mut(pool).expect("pool checked by caller");
        let (p, t0, t1) = (slot.info.address, slot.info.token0, slot.info.token1);
        slot.flow0 = std::mem::take(&mut slot.flow0) + delta0.clone();
        slot.flow1 = std::mem::take(&mut slot.flow1) + delta1.clone();
        for (token, flow, reserve) in [(t0, &slot.flow0, &slot.state.reserve0), (t1, &slot.flow1, &slot.state.reserve1)] {
            if -flow.clone() != reserve.to_signed() {
                return Err(ConservationError { pool: p, token, flow: flow.clone(), reserve: reserve.clone() }.into());
            }
        }
        if !delta0.is_zero() {
            self.ledger.record(actor, p, t0, delta0);
        }
        if !delta1.is_zero() {
            self.ledger.record(actor, p, t1, delta1);
        }
        Ok(())
    }

    fn add_liquidity(&mut self, actor: Address, pool: &str, amounts: &BTreeMap<String, Amount>) -> Result<(), StepError> {
        self.pool_mut(pool)?;
        let mut a0 = None;
        let mut a1 = None;
        for (label, v) in amounts {
            match self.side_of(pool, label)? {
                Side::Token0In => a0 = Some(v.clone()),
                Side::Token1In => a1 = Some(v.clone()),
            }
        }
        let lock = self.s.lock_minimum_liquidity;
        let block = self.block;
        let slot = self.pools.get_mut(pool).expect("checked");
        let st = &slot.state;
        let (a0, a1) = match (a0, a1) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) if !st.is_empty() => {
                let b = proportional(a.as_big(), st.reserve0.as_big(), st.reserve1.as_big());
                (a, Amount::from_big(b))
            }
            (None, Some(b)) if !st.is_empty() => {
                let a = proportional(b.as_big(), st.reserve1.as_big(), st.reserve0.as_big());
                (Amount::from_big(a), b)
            }
            _ => return Err(StepError::Amounts(format!("pool {pool:?} needs both amounts on first provision"))),
        };
        let lock_amount = if lock && st.is_empty() { Amount::from(MINIMUM_LIQUIDITY) } else { Amount::zero() };
        let out = st.add_liquidity_locked(&a0, &a1, &lock_amount)?;
        slot.state = out.state;
        *slot.lp_balances.entry(actor).or_default() += out.lp_minted.clone();
        slot.info.first_liquidity_block.get_or_insert(block);
        let (p, t0, t1) = (slot.info.address, slot.info.token0, slot.info.token1);
        self.place(encode::transfer(t0, actor, p, &a0));
        self.place(encode::transfer(t1, actor, p, &a1));
        if !out.locked.is_zero() {
            self.place(encode::transfer(p, Address::ZERO, Address::ZERO, &out.locked));
        }
        self.place(encode::transfer(p, Address::ZERO, actor, &out.lp_minted));
        self.place(encode::mint(p, actor, &a0, &a1));
        self.flow(actor, pool, -a0.to_signed(), -a1.to_signed())
    }

    fn swap(&mut self, actor: Address, pool: &str, token_in: &str, amount_in: &Amount) -> Result<(), StepError> {
        self.pool_mut(pool)?;
        let side = self.side_of(pool, token_in)?;
        let slot = self.pools.get_mut(pool).expect("checked");
        let out = slot.state.swap_exact_in(amount_in, side)?;
        slot.state = out.state;
        let (p, t0, t1) = (slot.info.address, slot.info.token0, slot.info.token1);
        let b = out.amount_out;
        let z = Amount::zero();
        let (tin, tout, amounts, d0, d1) = match side {
            Side::Token0In => (t0, t1, [amount_in, &z, &z, &b], -amount_in.to_signed(), b.to_signed()),
            Side::Token1In => (t1, t0, [&z, amount_in, &b, &z], b.to_signed(), -amount_in.to_signed()),
        };
        self.place(encode::transfer(tin, actor, p, amount_in));
        self.place(encode::transfer(tout, p, actor, &b));
        self.place(encode::swap(p, actor, amounts, actor));
        self.flow(actor, pool, d0, d1)
    }

    fn remove_liquidity(&mut self, actor: Address, pool: &str, lp: &LpAmount) -> Result<(), StepError> {
        let slot = self.pool_mut(pool)?;
        let held = slot.lp_balances.get(&actor).cloned().unwrap_or_default();
        let burned = match lp {
            LpAmount::All => held.clone(),
            LpAmount::Amount(a) => a.clone(),
            LpAmount::ShareBps(bps) => Amount::from_big(held.as_big() * *bps / 10_000u32),
        };
        if burned > held || burned.is_zero() {
            return Err(StepError::InsufficientLp { held, asked: burned });
        }
        let out = slot.state.remove_liquidity(&burned)?;
        slot.state = out.state;
        slot.lp_balances.insert(actor, held.checked_sub(&burned).expect("burned <= held"));
        let (p, t0, t1) = (slot.info.address, slot.info.token0, slot.info.token1);
        self.place(encode::transfer(p, actor, p, &burned));
        self.place(encode::transfer(p, p, Address::ZERO, &burned));
        if !out.amount0.is_zero() {
            self.place(encode::transfer(t0, p, actor, &out.amount0));
        }
        if !out.amount1.is_zero() {
            self.place(encode::transfer(t1, p, actor, &out.amount1));
        }
        self.place(encode::burn(p, actor, &out.amount0, &out.amount1, actor));
        self.flow(actor, pool, out.amount0.to_signed(), out.amount1.to_signed())
    }

    fn finish(mut self) -> SimOutput {
        let gas: HashMap<Hash32, (u64, u64)> = self.txs.iter().map(|t| (t.hash, (t.gas_used, t.gas_price))).collect();
        for r in self.records.iter_mut() {
            let (hash, used, price) = match r {
                Record::Creation(c) => (c.tx_hash, &mut c.gas_used, &mut c.gas_price),
                Record::Log(l) => (l.tx_hash, &mut l.gas_used, &mut l.gas_price),
            };
            let (u, p) = gas[&hash];
            *used = u;
            *price = p;
        }
        for t in &self.txs {
            self.ledger.add_gas(t.sender, crate::chain::tx_fee(t.gas_used, t.gas_price));
        }
        let mut pools = BTreeMap::new();
        for (label, slot) in self.pools {
            self.ledger
                .pools
                .insert(slot.info.address, (slot.info.token0, slot.info.token1, slot.state.clone()));
            pools.insert(label, slot.info);
        }
        let mut profile = self.s.profile.clone();
        profile.end_block = profile.end_block.max(self.block);
        SimOutput {
            fixture: FixtureFile { profile, records: self.records },
            ledger: self.ledger,
            tokens: self.tokens,
            pools,
            actors: self.actors,
        }
    }
}

/// Executes a scenario, producing its fixture and value ledger.
pub fn run_scenario(s: &Scenario) -> Result<SimOutput, SimError> {
    let mut tokens = s.external_tokens.clone();
    if let Some(native) = s.profile.wrapped_native_token {
        tokens.entry(native_label(&s.profile.name).to_string()).or_insert(native);
    }
    let mut r = Runner {
        s,
        block: s.profile.start_block,
        timestamp: s.start_timestamp,
        next_index: 0,
        records: Vec::new(),
        txs: Vec::new(),
        ledger: Ledger::default(),
        tokens,
        pools: BTreeMap::new(),
        actors: BTreeMap::new(),
        factory_pairs: HashMap::new(),
    };
    for (i, step) in s.steps.iter().enumerate() {
        r.step(step).map_err(|source| SimError { step: i, action: step.action.name(), source })?;
    }
    Ok(r.finish())
}

/// Parses a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, serde_json::Error> {
    serde_json::from_str(text)
}

/// Converts an amount in whole units with `decimals` to base units, for
/// building scenarios from decimal figures such as `2.67`.
pub fn units(whole: &str, decimals: u32) -> Amount {
    let (int, frac) = whole.split_once('.').unwrap_or((whole, ""));
    assert!(frac.len() as u32 <= decimals, "too many fractional digits in {whole}");
    let padded = format!("{int}{frac}{}", "0".repeat((decimals - frac.len() as u32) as usize));
    padded.trim_start_matches('0').parse().unwrap_or_default()
}

/// Approximate float view of base units, for logging.
pub fn as_units(a: &Amount, decimals: u32) -> f64 {
    a.as_big().to_f64().unwrap_or(f64::INFINITY) / 10f64.powi(decimals as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario {
            name: "t".into(),
            profile: ChainProfile::bsc(100, 100),
            start_timestamp: Some(1_000),
            fee_bps: 0,
            lock_minimum_liquidity: false,
            gas_price: 10,
            external_tokens: BTreeMap::new(),
            steps: vec![],
        }
    }

    fn amounts(pairs: &[(&str, u128)]) -> BTreeMap<String, Amount> {
        pairs.iter().map(|(k, v)| (k.to_string(), Amount::from(*v))).collect()
    }

    #[test]
    fn empty_scenario() {
        let out = run_scenario(&base()).unwrap();
        assert!(out.fixture.records.is_empty());
        assert_eq!(out.ledger, Ledger::default());
    }

    #[test]
    fn units_helper() {
        assert_eq!(units("2.67", 18), "2670000000000000000".parse().unwrap());
        assert_eq!(units("20", 18), "20e18".parse().unwrap());
        assert_eq!(units("0", 18), Amount::zero());
    }

    #[test]
    fn lp_amount_serde() {
        let all: LpAmount = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(all, LpAmount::All);
        let n: LpAmount = serde_json::from_str("\"1e3\"").unwrap();
        assert_eq!(n, LpAmount::Amount(Amount::from(1000u32)));
        let s: LpAmount = serde_json::from_str("{\"share_bps\": 9900}").unwrap();
        assert_eq!(s, LpAmount::ShareBps(9900));
        assert!(serde_json::from_str::<LpAmount>("{\"share_bps\": 10001}").is_err());
    }

    #[test]
    fn small_flow_and_errors() {
        let mut s = base();
        s.steps = vec![
            Step::new("eve", Action::CreateToken { token: "T".into(), name: None, symbol: None, decimals: 18, supply: Amount::from(10_000u32), compliant: true }),
            Step::new("eve", Action::CreatePool { pool: "p".into(), token_a: "T".into(), token_b: "WBNB".into(), factory: None, fee_bps: None }),
            Step::new("eve", Action::AddLiquidity { pool: "p".into(), amounts: amounts(&[("T", 1000), ("WBNB", 1000)]) }).joined(),
            Step::new("bot", Action::Snipe { pool: "p".into(), token_in: "WBNB".into(), amount_in: Amount::from(100u32) }),
            Step::advance(2, None),
            Step::new("bob", Action::Swap { pool: "p".into(), token_in: "WBNB".into(), amount_in: Amount::from(100u32) }),
            Step::new("eve", Action::RemoveLiquidity { pool: "p".into(), lp: LpAmount::All }),
        ];
        let out = run_scenario(&s).unwrap();
        out.fixture.validate().unwrap();
        out.ledger.check_conservation().unwrap();
        let wbnb = out.token("WBNB");
        let eve = out.actor("eve");
        // eve put in 1000 and took out everything the two buyers paid in.
        assert_eq!(out.ledger.net_flow(eve, wbnb), SignedAmount::from(200));
        assert_eq!(out.ledger.net_flow(out.actor("bot"), wbnb), SignedAmount::from(-100));
        // create_token + (create_pool joined with add_liquidity) + remove: three transactions.
        let fee = |g: u64| Amount::from(g * 10);
        assert_eq!(out.ledger.gas_of(eve), fee(1_250_000) + fee(2_450_000 + 185_000) + fee(160_000));
        let last = out.fixture.records.last().unwrap();
        assert_eq!(last.order_key().0, 102);
        assert_eq!(last.timestamp(), Some(1_006));

        let mut late = s.clone();
        late.steps.swap(3, 4);
        let err = run_scenario(&late).unwrap_err();
        assert_eq!(err.step, 4);
        assert!(matches!(err.source, StepError::NotInLiquidityBlock { .. }));

        let mut unknown = s.clone();
        unknown.steps.truncate(1);
        unknown.steps.push(Step::new("bob", Action::Swap { pool: "nope".into(), token_in: "T".into(), amount_in: Amount::from(1u8) }));
        assert_eq!(run_scenario(&unknown).unwrap_err().source, StepError::UnknownPool("nope".into()));
    }

    #[test]
    fn scenario_json_roundtrip() {
        let mut s = base();
        s.steps = vec![
            Step::new("eve", Action::CreateToken { token: "T".into(), name: Some("\u{1F48B}T".into()), symbol: None, decimals: 9, supply: Amount::from(5u8), compliant: false }),
            Step::advance(3, Some(7)),
            Step::new("eve", Action::RemoveLiquidity { pool: "p".into(), lp: LpAmount::ShareBps(5000) }).gas(1, 2),
        ];
        let text = serde_json::to_string_pretty(&s).unwrap();
        assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}
