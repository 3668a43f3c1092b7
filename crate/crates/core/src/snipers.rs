//! Sniper-bot footprints: how fast traders swap after a pool's first liquidity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::Address;
use crate::pools::PoolTimeline;
use crate::tables::{fmt_f64, Table};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SniperError {
    #[error("pool {pool}: swap at block {block} index {index} precedes the first liquidity")]
    SwapBeforeLiquidity { pool: Address, block: u64, index: u64 },
    #[error("thresholds must be positive (delay {delay}, pools {pools})")]
    Threshold { delay: u64, pools: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapLatency {
    pub trader: Address,
    pub pool: Address,
    pub delay_blocks: u64,
    pub same_block: bool,
}

fn pool_latencies(t: &PoolTimeline) -> Result<Vec<SwapLatency>, SniperError> {
    let minters: BTreeSet<Address> = t.mints().map(|m| m.meta.tx_sender).collect();
    let first_mint = t.mints().map(|m| (m.meta.block.number, m.meta.index)).min();
    let mut first: BTreeMap<Address, u64> = BTreeMap::new();
    for s in t.swaps() {
        let key = (s.meta.block.number, s.meta.index);
        let Some(mint) = first_mint.filter(|m| *m < key) else {
            return Err(SniperError::SwapBeforeLiquidity { pool: t.record.pool, block: key.0, index: key.1 });
        };
        if minters.contains(&s.meta.tx_sender) {
            continue;
        }
        // Events are in chain order, so the first entry is the first swap.
        first.entry(s.meta.tx_sender).or_insert(key.0 - mint.0);
    }
    Ok(first
        .into_iter()
        .map(|(trader, d)| SwapLatency { trader, pool: t.record.pool, delay_blocks: d, same_block: d == 0 })
        .collect())
}

/// One latency per (trader, pool) from the trader's first swap, liquidity
/// providers of the pool excluded. `restrict_to` limits the pools scanned.
pub fn swap_latencies(
    timelines: &BTreeMap<Address, PoolTimeline>,
    restrict_to: Option<&BTreeSet<Address>>,
) -> Result<Vec<SwapLatency>, SniperError> {
    let scoped: Vec<&PoolTimeline> = timelines
        .values()
        .filter(|t| restrict_to.is_none_or(|s| s.contains(&t.record.pool)))
        .collect();
    let per_pool: Vec<Vec<SwapLatency>> = scoped.par_iter().map(|t| pool_latencies(t)).collect::<Result<_, _>>()?;
    Ok(per_pool.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SniperVerdict {
    pub trader: Address,
    pub pools_swapped: usize,
    pub mean_delay_blocks: f64,
    pub same_block_fraction: f64,
    pub flagged: bool,
}

/// Aggregates latencies per trader, in address order.
pub fn flag_snipers(latencies: &[SwapLatency], delay_threshold: u64, pool_threshold: usize) -> Result<Vec<SniperVerdict>, SniperError> {
    if delay_threshold == 0 || pool_threshold == 0 {
        return Err(SniperError::Threshold { delay: delay_threshold, pools: pool_threshold });
    }
    // trader -> pool -> delay; a repeated pair keeps the smaller delay.
    let mut by: BTreeMap<Address, BTreeMap<Address, u64>> = BTreeMap::new();
    for l in latencies {
        by.entry(l.trader)
            .or_default()
            .entry(l.pool)
            .and_modify(|d| *d = (*d).min(l.delay_blocks))
            .or_insert(l.delay_blocks);
    }
    let grouped: Vec<(Address, BTreeMap<Address, u64>)> = by.into_iter().collect();
    Ok(grouped
        .into_par_iter()
        .map(|(trader, pools)| {
            let n = pools.len();
            let sum: u64 = pools.values().sum();
            let same = pools.values().filter(|d| **d == 0).count();
            let mean = sum as f64 / n as f64;
            SniperVerdict {
                trader,
                pools_swapped: n,
                mean_delay_blocks: mean,
                same_block_fraction: same as f64 / n as f64,
                flagged: mean < delay_threshold as f64 && n >= pool_threshold,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SniperStats {
    pub traders: usize,
    pub flagged: usize,
    pub pools: usize,
    pub pools_touched: usize,
    /// Share of scoped pools where a flagged trader swapped.
    pub pool_coverage: f64,
    /// Share of first swaps made by flagged traders.
    pub swap_share: f64,
    /// Among flagged traders' first swaps, the share in the liquidity block.
    pub same_block_share: f64,
}

pub fn sniper_activity_stats(verdicts: &[SniperVerdict], latencies: &[SwapLatency], pools: usize) -> SniperStats {
    let flagged: BTreeSet<Address> = verdicts.iter().filter(|v| v.flagged).map(|v| v.trader).collect();
    let mut touched = BTreeSet::new();
    let mut flagged_swaps = 0usize;
    let mut same = 0usize;
    for l in latencies.iter().filter(|l| flagged.contains(&l.trader)) {
        touched.insert(l.pool);
        flagged_swaps += 1;
        if l.same_block {
            same += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SniperStats {
        traders: verdicts.len(),
        flagged: flagged.len(),
        pools,
        pools_touched: touched.len(),
        pool_coverage: ratio(touched.len(), pools),
        swap_share: ratio(flagged_swaps, latencies.len()),
        same_block_share: ratio(same, flagged_swaps),
    }
}

/// Delay histogram of all first swaps: delay → count.
pub fn delay_histogram(latencies: &[SwapLatency]) -> BTreeMap<u64, usize> {
    let mut h: HashMap<u64, usize> = HashMap::new();
    for l in latencies {
        *h.entry(l.delay_blocks).or_default() += 1;
    }
    h.into_iter().collect()
}

pub fn verdicts_table(verdicts: &[SniperVerdict]) -> Table {
    let mut t = Table::new(&["trader", "pools_swapped", "mean_delay_blocks", "same_block_fraction", "flagged"]);
    for v in verdicts {
        t.push(vec![
            v.trader.to_string(),
            v.pools_swapped.to_string(),
            fmt_f64(v.mean_delay_blocks),
            fmt_f64(v.same_block_fraction),
            v.flagged.to_string(),
        ]);
    }
    t
}

/// Pools swapped against mean delay, one row per trader.
pub fn scatter_table(verdicts: &[SniperVerdict]) -> Table {
    let mut t = Table::new(&["trader", "pools_swapped", "mean_delay_blocks"]);
    for v in verdicts {
        t.push(vec![v.trader.to_string(), v.pools_swapped.to_string(), fmt_f64(v.mean_delay_blocks)]);
    }
    t
}

pub fn stats_table(s: &SniperStats) -> Table {
    let mut t = Table::new(&["traders", "flagged", "pools", "pools_touched", "pool_coverage", "swap_share", "same_block_share"]);
    t.push(vec![
        s.traders.to_string(),
        s.flagged.to_string(),
        s.pools.to_string(),
        s.pools_touched.to_string(),
        fmt_f64(s.pool_coverage),
        fmt_f64(s.swap_share),
        fmt_f64(s.same_block_share),
    ]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::Amount;
    use crate::chain::{BlockRef, Hash32};
    use crate::pools::{EventMeta, MintEvent, PoolEvent, PoolRecord, SwapEvent};

    fn meta(pool: Address, block: u64, index: u64, sender: &str) -> EventMeta {
        EventMeta {
            pool,
            block: BlockRef::new(block),
            index,
            tx_hash: Hash32::default(),
            tx_sender: Address::derive(sender),
            gas_used: 1,
            gas_price: 1,
        }
    }

    fn timeline(name: &str, swaps: &[(u64, u64, &str)]) -> PoolTimeline {
        let pool = Address::derive(name);
        let mut events = vec![PoolEvent::Mint(MintEvent {
            meta: meta(pool, 10, 5, "lp"),
            lp_amount: Amount::from(1u8),
            amount0: Amount::from(1u8),
            amount1: Amount::from(1u8),
        })];
        for (b, i, who) in swaps {
            events.push(PoolEvent::Swap(SwapEvent {
                meta: meta(pool, *b, *i, who),
                amount0_in: Amount::from(1u8),
                amount1_in: Amount::zero(),
                amount0_out: Amount::zero(),
                amount1_out: Amount::from(1u8),
                to: Address::derive(who),
            }));
        }
        PoolTimeline {
            record: PoolRecord {
                pool,
                factory: Address::ZERO,
                creator: Address::derive("lp"),
                token0: Address::derive("a"),
                token1: Address::derive("b"),
                created_block: BlockRef::new(9),
                created_index: 0,
                tx_hash: Hash32::default(),
                last_event_block: BlockRef::new(20),
                gas_used: 1,
                gas_price: 1,
            },
            events,
        }
    }

    fn map(ts: Vec<PoolTimeline>) -> BTreeMap<Address, PoolTimeline> {
        ts.into_iter().map(|t| (t.record.pool, t)).collect()
    }

    #[test]
    fn first_swap_only() {
        let tl = map(vec![timeline("p", &[(10, 6, "bot"), (14, 0, "user"), (15, 0, "bot"), (16, 0, "lp")])]);
        let lat = swap_latencies(&tl, None).unwrap();
        assert_eq!(lat.len(), 2);
        let bot = lat.iter().find(|l| l.trader == Address::derive("bot")).unwrap();
        assert!(bot.same_block && bot.delay_blocks == 0);
        let user = lat.iter().find(|l| l.trader == Address::derive("user")).unwrap();
        assert_eq!(user.delay_blocks, 4);
    }

    #[test]
    fn swap_before_mint_is_corrupt() {
        let tl = map(vec![timeline("p", &[(10, 4, "bot")])]);
        assert!(matches!(swap_latencies(&tl, None), Err(SniperError::SwapBeforeLiquidity { .. })));
    }

    #[test]
    fn pool_threshold_is_inclusive() {
        let lat: Vec<SwapLatency> = (0..100)
            .map(|i| SwapLatency { trader: Address::derive("t"), pool: Address::derive(&format!("p{i}")), delay_blocks: 2, same_block: false })
            .collect();
        assert!(flag_snipers(&lat, 5, 100).unwrap()[0].flagged);
        assert!(!flag_snipers(&lat[..99], 5, 100).unwrap()[0].flagged);
        assert!(!flag_snipers(&lat, 2, 100).unwrap()[0].flagged);
        assert!(flag_snipers(&lat, 0, 100).is_err());
    }

    #[test]
    fn zero_flagged_stats() {
        let s = sniper_activity_stats(&[], &[], 10);
        assert_eq!((s.pool_coverage, s.swap_share, s.same_block_share), (0.0, 0.0, 0.0));
    }
}
