//! Exit-scam detection on pool timelines and scammer gain accounting.
//!
//! A pool matches when it saw exactly one `Mint` and exactly one later
//! `Burn` that removed at least the threshold share of the minted LP.
//! Gains follow
//!
//! ```text
//! base_gain = delta_B − fees_base
//! net_gain  = base_gain − T_in + T_out − fees_swap
//! ```
//!
//! where `delta_B` is the quote token taken out at the burn minus the quote
//! put in at the mint, `T_in`/`T_out` are the quote amounts the operator
//! paid into / received from the pool through its own swaps, and fees are
//! gas fees of the distinct transactions involved.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{Amount, SignedAmount};
use crate::analytics::{LifetimeClass, LifetimeRecord, SubjectKind};
use crate::chain::{Address, Hash32};
use crate::pools::{BurnEvent, MintEvent, PoolRecord, PoolTimeline};
use crate::tables::{fmt_f64, Table};
use crate::tokens::TokenRecord;

pub const DEFAULT_LP_BURN_THRESHOLD: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RugPullError {
    #[error("LP burn threshold {0} outside (0, 1]")]
    Threshold(f64),
}

fn threshold_ppm(threshold: f64) -> Result<u64, RugPullError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(RugPullError::Threshold(threshold));
    }
    Ok((threshold * 1e6).round() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manipulation {
    None,
    Pump,
    Hedge,
    WashTrading,
}

impl Manipulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Manipulation::None => "none",
            Manipulation::Pump => "pump",
            Manipulation::Hedge => "hedge",
            Manipulation::WashTrading => "wash_trading",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExitScamMatch {
    pub mint: MintEvent,
    pub burn: BurnEvent,
    /// The minting transaction sender.
    pub operator: Address,
    pub operator_mismatch: bool,
    /// Burned LP over minted LP, in parts per million (floored).
    pub burned_ppm: u64,
}

/// Applies the single-mint / single-burn rule.
pub fn detect_exit_scam(t: &PoolTimeline, threshold: f64) -> Result<Option<ExitScamMatch>, RugPullError> {
    let needed = threshold_ppm(threshold)?;
    let mut mints = t.mints();
    let mut burns = t.burns();
    let (Some(mint), None) = (mints.next(), mints.next()) else {
        return Ok(None);
    };
    let (Some(burn), None) = (burns.next(), burns.next()) else {
        return Ok(None);
    };
    if (burn.meta.block.number, burn.meta.index) <= (mint.meta.block.number, mint.meta.index) {
        return Ok(None);
    }
    let burned = burn.lp_amount.as_big() * 1_000_000u32;
    if burned < mint.lp_amount.as_big() * needed {
        return Ok(None);
    }
    let ppm = burned / mint.lp_amount.as_big();
    Ok(Some(ExitScamMatch {
        operator: mint.meta.tx_sender,
        operator_mismatch: burn.meta.tx_sender != mint.meta.tx_sender,
        burned_ppm: u64::try_from(ppm).unwrap_or(u64::MAX),
        mint: mint.clone(),
        burn: burn.clone(),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unpriceable {
    NeitherValuable,
    BothValuable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuoteSide {
    pub scam_token: Address,
    pub quote_token: Address,
    pub quote_is_token0: bool,
}

/// Picks the valuable pair member as the quote token.
pub fn identify_quote_token(record: &PoolRecord, valuable: &BTreeSet<Address>) -> Result<QuoteSide, Unpriceable> {
    match (valuable.contains(&record.token0), valuable.contains(&record.token1)) {
        (true, false) => Ok(QuoteSide { scam_token: record.token1, quote_token: record.token0, quote_is_token0: true }),
        (false, true) => Ok(QuoteSide { scam_token: record.token0, quote_token: record.token1, quote_is_token0: false }),
        (true, true) => Err(Unpriceable::BothValuable),
        (false, false) => Err(Unpriceable::NeitherValuable),
    }
}

/// Transaction of the scam token's deployment, when known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenCreationTx {
    pub tx_hash: Hash32,
    pub gas_used: u64,
    pub gas_price: u64,
}

impl From<&TokenRecord> for TokenCreationTx {
    fn from(t: &TokenRecord) -> Self {
        TokenCreationTx { tx_hash: t.creation.tx_hash, gas_used: t.creation.gas_used, gas_price: t.creation.gas_price }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VictimSwaps {
    pub buy_count: usize,
    pub sell_count: usize,
    pub buyer_addresses: Vec<Address>,
    pub seller_addresses: Vec<Address>,
    /// Quote paid in by buyers plus quote received by sellers.
    pub quote_volume: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RugPullReport {
    pub pool: Address,
    pub scam_token: Address,
    pub quote_token: Address,
    pub operator: Address,
    pub burn_sender: Address,
    pub operator_mismatch: bool,
    pub mint_block: u64,
    pub burn_block: u64,
    pub lp_minted: Amount,
    pub lp_burned: Amount,
    pub quote_in_at_mint: Amount,
    pub quote_out_at_burn: Amount,
    pub delta_b: SignedAmount,
    pub t_in: Amount,
    pub t_out: Amount,
    pub fees_base: Amount,
    pub fees_swap: Amount,
    pub base_gain: SignedAmount,
    pub net_gain: SignedAmount,
    /// Fewer distinct base transactions than base steps (deployment aggregated).
    pub aggregated: bool,
    /// The token creation transaction was not available.
    pub fees_partial: bool,
    pub manipulation: Manipulation,
    pub successful: bool,
    pub victim_swaps: VictimSwaps,
}

/// Operator trades classified by direction of the scam token.
pub fn classify_manipulation(t: &PoolTimeline, operator: Address, side: &QuoteSide) -> Manipulation {
    let mut buys = false;
    let mut sells = false;
    for s in t.swaps().filter(|s| s.meta.tx_sender == operator) {
        // Quote in means scam token out: a buy.
        let quote_in = if side.quote_is_token0 { !s.amount0_in.is_zero() } else { !s.amount1_in.is_zero() };
        if quote_in {
            buys = true;
        } else {
            sells = true;
        }
    }
    match (buys, sells) {
        (true, true) => Manipulation::WashTrading,
        (true, false) => Manipulation::Pump,
        (false, true) => Manipulation::Hedge,
        (false, false) => Manipulation::None,
    }
}

/// Gain accounting for a matched pool.
pub fn compute_gains(
    t: &PoolTimeline,
    m: &ExitScamMatch,
    side: &QuoteSide,
    token_creation: Option<TokenCreationTx>,
) -> RugPullReport {
    let (quote_in_at_mint, quote_out_at_burn) = if side.quote_is_token0 {
        (m.mint.amount0.clone(), m.burn.amount0.clone())
    } else {
        (m.mint.amount1.clone(), m.burn.amount1.clone())
    };
    let delta_b = quote_out_at_burn.to_signed() - quote_in_at_mint.to_signed();

    let mut base_txs: BTreeMap<Hash32, Amount> = BTreeMap::new();
    let mut base_steps = 3;
    if let Some(c) = token_creation {
        base_txs.insert(c.tx_hash, crate::chain::tx_fee(c.gas_used, c.gas_price));
        base_steps += 1;
    }
    base_txs.insert(t.record.tx_hash, t.record.fee());
    base_txs.insert(m.mint.meta.tx_hash, m.mint.meta.fee());
    base_txs.insert(m.burn.meta.tx_hash, m.burn.meta.fee());
    let aggregated = base_txs.len() < base_steps;
    let fees_base: Amount = base_txs.values().sum();

    let operator = m.operator;
    let mut t_in = Amount::zero();
    let mut t_out = Amount::zero();
    let mut swap_txs: BTreeMap<Hash32, Amount> = BTreeMap::new();
    let mut buyers = BTreeSet::new();
    let mut sellers = BTreeSet::new();
    let mut victims = VictimSwaps::default();
    for s in t.swaps() {
        let (q_in, q_out) = if side.quote_is_token0 { (&s.amount0_in, &s.amount0_out) } else { (&s.amount1_in, &s.amount1_out) };
        let trader = s.meta.tx_sender;
        if trader == operator {
            t_in += q_in.clone();
            t_out += q_out.clone();
            if !base_txs.contains_key(&s.meta.tx_hash) {
                swap_txs.insert(s.meta.tx_hash, s.meta.fee());
            }
        } else if trader != t.record.creator {
            if q_in.is_zero() {
                victims.sell_count += 1;
                sellers.insert(trader);
                victims.quote_volume += q_out.clone();
            } else {
                victims.buy_count += 1;
                buyers.insert(trader);
                victims.quote_volume += q_in.clone();
            }
        }
    }
    victims.buyer_addresses = buyers.into_iter().collect();
    victims.seller_addresses = sellers.into_iter().collect();
    let fees_swap: Amount = swap_txs.values().sum();
    let base_gain = delta_b.clone() - &fees_base;
    let net_gain = base_gain.clone() - &t_in + t_out.to_signed() - fees_swap.to_signed();
    RugPullReport {
        pool: t.record.pool,
        scam_token: side.scam_token,
        quote_token: side.quote_token,
        operator,
        burn_sender: m.burn.meta.tx_sender,
        operator_mismatch: m.operator_mismatch,
        mint_block: m.mint.meta.block.number,
        burn_block: m.burn.meta.block.number,
        lp_minted: m.mint.lp_amount.clone(),
        lp_burned: m.burn.lp_amount.clone(),
        quote_in_at_mint,
        quote_out_at_burn,
        delta_b,
        t_in,
        t_out,
        fees_base,
        fees_swap,
        base_gain,
        successful: net_gain.is_positive(),
        net_gain,
        aggregated,
        fees_partial: token_creation.is_none(),
        manipulation: classify_manipulation(t, operator, side),
        victim_swaps: victims,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Pools whose scam-side token lived less than a day.
    OneDay,
    All,
}

impl std::str::FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "one-day" => Ok(Scope::OneDay),
            "all" => Ok(Scope::All),
            other => Err(format!("unknown scope {other:?} (one-day|all)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RugPullConfig {
    pub threshold: f64,
    pub scope: Scope,
    pub valuable: BTreeSet<Address>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RugPullAnalysis {
    pub scanned: usize,
    pub out_of_scope: usize,
    pub reports: Vec<RugPullReport>,
    /// Matched pools that could not be priced.
    pub unpriceable: Vec<(Address, Unpriceable)>,
}

impl RugPullAnalysis {
    pub fn pools(&self) -> BTreeSet<Address> {
        self.reports.iter().map(|r| r.pool).collect()
    }

    pub fn successful(&self) -> usize {
        self.reports.iter().filter(|r| r.successful).count()
    }
}

fn scam_side_token(record: &PoolRecord, valuable: &BTreeSet<Address>) -> Option<Address> {
    match identify_quote_token(record, valuable) {
        Ok(side) => Some(side.scam_token),
        Err(_) => None,
    }
}

/// Runs detection and gain accounting over all timelines.
pub fn analyze(
    timelines: &BTreeMap<Address, PoolTimeline>,
    tokens: &HashMap<Address, &TokenRecord>,
    lifetimes: &[LifetimeRecord],
    cfg: &RugPullConfig,
) -> Result<RugPullAnalysis, RugPullError> {
    threshold_ppm(cfg.threshold)?;
    let short_lived: BTreeSet<Address> = lifetimes
        .iter()
        .filter(|l| l.kind == SubjectKind::Token && l.class != LifetimeClass::Longer)
        .map(|l| l.subject)
        .collect();
    let in_scope = |t: &PoolTimeline| match cfg.scope {
        Scope::All => true,
        // A pool with no valuable side is checked on both tokens.
        Scope::OneDay => match scam_side_token(&t.record, &cfg.valuable) {
            Some(tok) => short_lived.contains(&tok),
            None => short_lived.contains(&t.record.token0) || short_lived.contains(&t.record.token1),
        },
    };
    enum Outcome {
        OutOfScope,
        NoMatch,
        Report(Box<RugPullReport>),
        Unpriceable(Address, Unpriceable),
    }
    let outcomes: Vec<Outcome> = timelines
        .par_iter()
        .map(|(_, t)| {
            if !in_scope(t) {
                return Ok(Outcome::OutOfScope);
            }
            let Some(m) = detect_exit_scam(t, cfg.threshold)? else {
                return Ok(Outcome::NoMatch);
            };
            Ok(match identify_quote_token(&t.record, &cfg.valuable) {
                Ok(side) => {
                    let creation = tokens.get(&side.scam_token).map(|r| TokenCreationTx::from(*r));
                    Outcome::Report(Box::new(compute_gains(t, &m, &side, creation)))
                }
                Err(u) => Outcome::Unpriceable(t.record.pool, u),
            })
        })
        .collect::<Result<_, RugPullError>>()?;
    let mut out = RugPullAnalysis { scanned: timelines.len(), ..Default::default() };
    for o in outcomes {
        match o {
            Outcome::OutOfScope => out.out_of_scope += 1,
            Outcome::NoMatch => {}
            Outcome::Report(r) => out.reports.push(*r),
            Outcome::Unpriceable(p, u) => out.unpriceable.push((p, u)),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VictimStats {
    pub unique_victims: usize,
    pub buys: usize,
    pub sells: usize,
    pub buy_share: f64,
    /// Mean quote amount per victim swap, floored, in base units.
    pub mean_swap_quote: Amount,
}

/// Victim aggregates across reports; operators and pool creators are excluded.
pub fn victim_stats(reports: &[RugPullReport]) -> VictimStats {
    let mut addrs = BTreeSet::new();
    let mut buys = 0;
    let mut sells = 0;
    let mut volume = Amount::zero();
    for r in reports {
        addrs.extend(r.victim_swaps.buyer_addresses.iter().copied());
        addrs.extend(r.victim_swaps.seller_addresses.iter().copied());
        buys += r.victim_swaps.buy_count;
        sells += r.victim_swaps.sell_count;
        volume += r.victim_swaps.quote_volume.clone();
    }
    let n = buys + sells;
    VictimStats {
        unique_victims: addrs.len(),
        buys,
        sells,
        buy_share: if n == 0 { 0.0 } else { buys as f64 / n as f64 },
        mean_swap_quote: if n == 0 { Amount::zero() } else { Amount::from_big(volume.as_big() / n) },
    }
}

pub fn reports_table(reports: &[RugPullReport]) -> Table {
    let mut t = Table::new(&[
        "pool", "scam_token", "quote_token", "operator", "burn_sender", "operator_mismatch", "mint_block", "burn_block",
        "lp_minted", "lp_burned", "delta_b", "t_in", "t_out", "fees_base", "fees_swap", "base_gain", "net_gain",
        "aggregated", "fees_partial", "manipulation", "successful", "victim_buys", "victim_sells", "victim_buyers",
    ]);
    for r in reports {
        t.push(vec![
            r.pool.to_string(),
            r.scam_token.to_string(),
            r.quote_token.to_string(),
            r.operator.to_string(),
            r.burn_sender.to_string(),
            r.operator_mismatch.to_string(),
            r.mint_block.to_string(),
            r.burn_block.to_string(),
            r.lp_minted.to_string(),
            r.lp_burned.to_string(),
            r.delta_b.to_string(),
            r.t_in.to_string(),
            r.t_out.to_string(),
            r.fees_base.to_string(),
            r.fees_swap.to_string(),
            r.base_gain.to_string(),
            r.net_gain.to_string(),
            r.aggregated.to_string(),
            r.fees_partial.to_string(),
            r.manipulation.as_str().into(),
            r.successful.to_string(),
            r.victim_swaps.buy_count.to_string(),
            r.victim_swaps.sell_count.to_string(),
            r.victim_swaps.buyer_addresses.len().to_string(),
        ]);
    }
    t
}

pub fn victim_stats_table(v: &VictimStats) -> Table {
    let mut t = Table::new(&["unique_victims", "buys", "sells", "buy_share", "mean_swap_quote"]);
    t.push(vec![
        v.unique_victims.to_string(),
        v.buys.to_string(),
        v.sells.to_string(),
        fmt_f64(v.buy_share),
        v.mean_swap_quote.to_string(),
    ]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{BlockRef, Hash32};
    use crate::pools::{EventMeta, PoolEvent, SwapEvent};

    fn meta(block: u64, index: u64, sender: &str, tx: u8) -> EventMeta {
        EventMeta {
            pool: Address::derive("pool"),
            block: BlockRef::new(block),
            index,
            tx_hash: Hash32([tx; 32]),
            tx_sender: Address::derive(sender),
            gas_used: 100,
            gas_price: 1,
        }
    }

    fn record() -> PoolRecord {
        PoolRecord {
            pool: Address::derive("pool"),
            factory: Address::derive("f"),
            creator: Address::derive("op"),
            token0: Address::derive("scam"),
            token1: Address::derive("wbnb"),
            created_block: BlockRef::new(1),
            created_index: 0,
            tx_hash: Hash32([1; 32]),
            last_event_block: BlockRef::new(9),
            gas_used: 100,
            gas_price: 1,
        }
    }

    fn mint(block: u64, lp: u64, q: u64, sender: &str, tx: u8) -> PoolEvent {
        PoolEvent::Mint(MintEvent { meta: meta(block, 1, sender, tx), lp_amount: Amount::from(lp), amount0: Amount::from(1000u32), amount1: Amount::from(q) })
    }

    fn burn(block: u64, lp: u64, q: u64, sender: &str, tx: u8) -> PoolEvent {
        PoolEvent::Burn(BurnEvent {
            meta: meta(block, 1, sender, tx),
            lp_amount: Amount::from(lp),
            amount0: Amount::from(900u32),
            amount1: Amount::from(q),
            to: Address::derive(sender),
        })
    }

    fn buy(block: u64, q: u64, sender: &str, tx: u8) -> PoolEvent {
        PoolEvent::Swap(SwapEvent {
            meta: meta(block, 2, sender, tx),
            amount0_in: Amount::zero(),
            amount1_in: Amount::from(q),
            amount0_out: Amount::from(1u8),
            amount1_out: Amount::zero(),
            to: Address::derive(sender),
        })
    }

    fn tl(events: Vec<PoolEvent>) -> PoolTimeline {
        PoolTimeline { record: record(), events }
    }

    #[test]
    fn threshold_semantics() {
        let t = tl(vec![mint(2, 1000, 20, "op", 2), burn(5, 980, 25, "op", 5)]);
        assert!(detect_exit_scam(&t, 0.99).unwrap().is_none());
        assert!(detect_exit_scam(&t, 0.95).unwrap().is_some());
        assert!(detect_exit_scam(&t, 0.0).is_err());
        assert!(detect_exit_scam(&t, 1.5).is_err());
    }

    #[test]
    fn two_mints_rejected() {
        let t = tl(vec![mint(2, 1000, 20, "op", 2), mint(3, 10, 1, "x", 3), burn(5, 1000, 25, "op", 5)]);
        assert!(detect_exit_scam(&t, 0.99).unwrap().is_none());
    }

    #[test]
    fn quote_identification() {
        let r = record();
        let valuable: BTreeSet<Address> = [Address::derive("wbnb")].into();
        let side = identify_quote_token(&r, &valuable).unwrap();
        assert_eq!((side.scam_token, side.quote_token), (Address::derive("scam"), Address::derive("wbnb")));
        assert_eq!(identify_quote_token(&r, &BTreeSet::new()), Err(Unpriceable::NeitherValuable));
        let both: BTreeSet<Address> = [r.token0, r.token1].into();
        assert_eq!(identify_quote_token(&r, &both), Err(Unpriceable::BothValuable));
    }

    #[test]
    fn nobody_swapped_loses_fees() {
        let t = tl(vec![mint(2, 1000, 20, "op", 2), burn(5, 1000, 20, "op", 5)]);
        let m = detect_exit_scam(&t, 0.99).unwrap().unwrap();
        let side = identify_quote_token(&t.record, &[Address::derive("wbnb")].into()).unwrap();
        let r = compute_gains(&t, &m, &side, Some(TokenCreationTx { tx_hash: Hash32([9; 32]), gas_used: 50, gas_price: 2 }));
        assert!(r.delta_b.is_zero());
        assert_eq!(r.fees_base, Amount::from(400u32));
        assert_eq!(r.net_gain, SignedAmount::from(-400));
        assert!(!r.successful && !r.aggregated && !r.fees_partial);
        assert_eq!(r.manipulation, Manipulation::None);
    }

    #[test]
    fn operator_swaps_and_victims() {
        let t = tl(vec![
            mint(2, 1000, 20, "op", 2),
            buy(3, 7, "victim", 3),
            buy(4, 5, "op", 4),
            burn(5, 1000, 32, "op", 2),
        ]);
        let m = detect_exit_scam(&t, 0.99).unwrap().unwrap();
        let side = identify_quote_token(&t.record, &[Address::derive("wbnb")].into()).unwrap();
        let r = compute_gains(&t, &m, &side, None);
        // mint and burn share a transaction hash here: aggregated.
        assert!(r.aggregated && r.fees_partial);
        assert_eq!(r.delta_b, SignedAmount::from(12));
        assert_eq!((r.t_in.clone(), r.t_out.clone()), (Amount::from(5u8), Amount::zero()));
        assert_eq!(r.manipulation, Manipulation::Pump);
        assert_eq!(r.net_gain, SignedAmount::from(12 - 200 - 5 - 100));
        assert_eq!(r.victim_swaps.buy_count, 1);
        let v = victim_stats(&[r]);
        assert_eq!((v.unique_victims, v.buys, v.buy_share), (1, 1, 1.0));
    }
}
