//! Token and pool lifetimes, creator distributions and spammer flagging.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Address, BlockRef};
use crate::ingestion::ChainProfile;
use crate::pools::PoolRecord;
use crate::tables::{fmt_f64, Table};
use crate::tokens::TokenDataset;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DEFAULT_SPAMMER_PERCENTILE: f64 = 0.01;
pub const DEFAULT_GRID: &str = "1b,10m,1h,4h,24h,7d,30d,365d";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{subject}: last event block {last} precedes creation block {created}")]
    NegativeLifetime { subject: Address, created: u64, last: u64 },
    #[error("{subject}: timestamps go backwards between blocks {created} and {last}")]
    TimestampOrder { subject: Address, created: u64, last: u64 },
    #[error("bad grid point {0:?}")]
    GridPoint(String),
    #[error("grid must be strictly increasing")]
    GridOrder,
    #[error("percentile {0} outside (0, 1]")]
    Percentile(f64),
    #[error("no creator profiles to rank")]
    NoProfiles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Token,
    Pool,
}

impl SubjectKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubjectKind::Token => "token",
            SubjectKind::Pool => "pool",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LifetimeClass {
    OneBlock,
    OneDay,
    Longer,
}

impl LifetimeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LifetimeClass::OneBlock => "one-block",
            LifetimeClass::OneDay => "one-day",
            LifetimeClass::Longer => "longer",
        }
    }

    /// True for tokens that died within a day, one-block ones included.
    pub fn within_one_day(&self) -> bool {
        !matches!(self, LifetimeClass::Longer)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeRecord {
    pub subject: Address,
    pub kind: SubjectKind,
    pub created_block: BlockRef,
    pub last_event_block: BlockRef,
    pub lifetime_blocks: u64,
    pub lifetime_seconds: f64,
    /// False when seconds were estimated from the mean block interval.
    pub exact_seconds: bool,
    pub class: LifetimeClass,
}

pub fn lifetime_of(
    subject: Address,
    kind: SubjectKind,
    created: BlockRef,
    last: BlockRef,
    mean_block_interval: f64,
) -> Result<LifetimeRecord, AnalyticsError> {
    let blocks = last.number.checked_sub(created.number).ok_or(AnalyticsError::NegativeLifetime {
        subject,
        created: created.number,
        last: last.number,
    })?;
    let (seconds, exact) = match (created.timestamp, last.timestamp) {
        (Some(a), Some(b)) => {
            let d = b.checked_sub(a).ok_or(AnalyticsError::TimestampOrder {
                subject,
                created: created.number,
                last: last.number,
            })?;
            (d as f64, true)
        }
        _ => (blocks as f64 * mean_block_interval, false),
    };
    let class = if blocks == 0 {
        LifetimeClass::OneBlock
    } else if seconds < SECONDS_PER_DAY {
        LifetimeClass::OneDay
    } else {
        LifetimeClass::Longer
    };
    Ok(LifetimeRecord {
        subject,
        kind,
        created_block: created,
        last_event_block: last,
        lifetime_blocks: blocks,
        lifetime_seconds: seconds,
        exact_seconds: exact,
        class,
    })
}

/// One record per standard token, then one per pool, each group in address order.
pub fn compute_lifetimes(
    tokens: &TokenDataset,
    pools: &[PoolRecord],
    profile: &ChainProfile,
) -> Result<Vec<LifetimeRecord>, AnalyticsError> {
    let dt = profile.mean_block_interval;
    let standard: Vec<_> = tokens.standard_tokens().collect();
    let mut out: Vec<LifetimeRecord> = standard
        .par_iter()
        .map(|t| lifetime_of(t.address, SubjectKind::Token, t.first_block, t.last_event_block, dt))
        .collect::<Result<_, _>>()?;
    out.sort_by_key(|r| r.subject);
    let mut pool_recs: Vec<LifetimeRecord> = pools
        .par_iter()
        .map(|p| lifetime_of(p.pool, SubjectKind::Pool, p.created_block, p.last_event_block, dt))
        .collect::<Result<_, _>>()?;
    pool_recs.sort_by_key(|r| r.subject);
    out.extend(pool_recs);
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LifetimeShares {
    pub total: usize,
    pub one_block: usize,
    /// Died within a day, one-block subjects included.
    pub one_day: usize,
    pub one_block_share: f64,
    pub one_day_share: f64,
}

pub fn lifetime_shares(records: &[LifetimeRecord], kind: SubjectKind) -> LifetimeShares {
    let mut s = LifetimeShares::default();
    for r in records.iter().filter(|r| r.kind == kind) {
        s.total += 1;
        if r.class == LifetimeClass::OneBlock {
            s.one_block += 1;
        }
        if r.class.within_one_day() {
            s.one_day += 1;
        }
    }
    if s.total > 0 {
        s.one_block_share = s.one_block as f64 / s.total as f64;
        s.one_day_share = s.one_day as f64 / s.total as f64;
    }
    s
}

/// A CDF grid point: a block count or a wall-clock duration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridPoint {
    Blocks(u64),
    Seconds(u64),
}

impl GridPoint {
    fn approx_seconds(&self, mean_block_interval: f64) -> f64 {
        match *self {
            GridPoint::Blocks(b) => b as f64 * mean_block_interval,
            GridPoint::Seconds(s) => s as f64,
        }
    }

    fn below(&self, r: &LifetimeRecord) -> bool {
        match *self {
            GridPoint::Blocks(b) => r.lifetime_blocks < b,
            GridPoint::Seconds(s) => r.lifetime_seconds < s as f64,
        }
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GridPoint::Blocks(b) => write!(f, "{b}b"),
            GridPoint::Seconds(s) => {
                for (unit, n) in [("d", 86_400), ("h", 3_600), ("m", 60)] {
                    if s >= n && s % n == 0 {
                        return write!(f, "{}{unit}", s / n);
                    }
                }
                write!(f, "{s}s")
            }
        }
    }
}

impl FromStr for GridPoint {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || AnalyticsError::GridPoint(s.to_string());
        let split = s.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
        let n: u64 = s[..split].parse().map_err(|_| bad())?;
        let mult = match &s[split..] {
            "b" => return Ok(GridPoint::Blocks(n)),
            "s" => 1,
            "m" => 60,
            "h" => 3_600,
            "d" => 86_400,
            _ => return Err(bad()),
        };
        Ok(GridPoint::Seconds(n.checked_mul(mult).ok_or_else(bad)?))
    }
}

/// Parses a comma separated grid such as `1b,10m,1h`.
pub fn parse_grid(s: &str) -> Result<Vec<GridPoint>, AnalyticsError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

pub fn default_grid() -> Vec<GridPoint> {
    parse_grid(DEFAULT_GRID).expect("static grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub kind: SubjectKind,
    pub point: String,
    pub seconds: f64,
    pub dead: usize,
    pub fraction: f64,
}

/// Fraction of subjects whose lifetime is strictly below each grid point,
/// per subject kind present in `records`.
pub fn lifetime_cdf(
    records: &[LifetimeRecord],
    grid: &[GridPoint],
    mean_block_interval: f64,
) -> Result<Vec<CdfRow>, AnalyticsError> {
    for w in grid.windows(2) {
        if w[0].approx_seconds(mean_block_interval) >= w[1].approx_seconds(mean_block_interval) {
            return Err(AnalyticsError::GridOrder);
        }
    }
    let mut rows = Vec::new();
    for kind in [SubjectKind::Token, SubjectKind::Pool] {
        let group: Vec<&LifetimeRecord> = records.iter().filter(|r| r.kind == kind).collect();
        if group.is_empty() {
            continue;
        }
        for g in grid {
            let dead = group.iter().filter(|r| g.below(r)).count();
            rows.push(CdfRow {
                kind,
                point: g.to_string(),
                seconds: g.approx_seconds(mean_block_interval),
                dead,
                fraction: dead as f64 / group.len() as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatorProfile {
    pub creator: Address,
    pub tokens_created: usize,
    pub via_creation_tx: usize,
    pub via_internal: usize,
    pub one_day_tokens: usize,
    pub is_spammer: bool,
}

/// Groups standard tokens by deployer. Sorted by descending count, then address.
pub fn creator_profiles(tokens: &TokenDataset, lifetimes: &[LifetimeRecord]) -> Vec<CreatorProfile> {
    let short: std::collections::HashSet<Address> = lifetimes
        .iter()
        .filter(|l| l.kind == SubjectKind::Token && l.class.within_one_day())
        .map(|l| l.subject)
        .collect();
    let mut by: BTreeMap<Address, CreatorProfile> = BTreeMap::new();
    for t in tokens.standard_tokens() {
        let p = by.entry(t.deployer()).or_insert_with(|| CreatorProfile {
            creator: t.deployer(),
            tokens_created: 0,
            via_creation_tx: 0,
            via_internal: 0,
            one_day_tokens: 0,
            is_spammer: false,
        });
        p.tokens_created += 1;
        if t.creation.via_internal {
            p.via_internal += 1;
        } else {
            p.via_creation_tx += 1;
        }
        if short.contains(&t.address) {
            p.one_day_tokens += 1;
        }
    }
    let mut out: Vec<CreatorProfile> = by.into_values().collect();
    out.sort_by(|a, b| b.tokens_created.cmp(&a.tokens_created).then(a.creator.cmp(&b.creator)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpammerSummary {
    pub percentile: f64,
    pub creators: usize,
    pub tokens: usize,
    /// Lowest token count among flagged creators.
    pub threshold: usize,
    pub spammers: usize,
    pub spammer_tokens: usize,
    pub spammer_share: f64,
}

/// Flags the top `percentile` of creators by token count, keeping every
/// creator tied with the last one ranked in.
pub fn flag_spammers(profiles: &mut [CreatorProfile], percentile: f64) -> Result<SpammerSummary, AnalyticsError> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(AnalyticsError::Percentile(percentile));
    }
    if profiles.is_empty() {
        return Err(AnalyticsError::NoProfiles);
    }
    let n = profiles.len();
    // Tolerance keeps 0.01 * 2000 from landing on 21.
    let k = ((percentile * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut counts: Vec<usize> = profiles.iter().map(|p| p.tokens_created).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let threshold = counts[k - 1];
    let mut spammers = 0;
    let mut spammer_tokens = 0;
    let mut tokens = 0;
    for p in profiles.iter_mut() {
        p.is_spammer = p.tokens_created >= threshold;
        tokens += p.tokens_created;
        if p.is_spammer {
            spammers += 1;
            spammer_tokens += p.tokens_created;
        }
    }
    Ok(SpammerSummary {
        percentile,
        creators: n,
        tokens,
        threshold,
        spammers,
        spammer_tokens,
        spammer_share: if tokens == 0 { 0.0 } else { spammer_tokens as f64 / tokens as f64 },
    })
}

/// Share of all tokens created by the creators with the fewest tokens,
/// taking the bottom `fraction` of creators by rank.
pub fn bottom_creator_share(profiles: &[CreatorProfile], fraction: f64) -> f64 {
    let total: usize = profiles.iter().map(|p| p.tokens_created).sum();
    if total == 0 {
        return 0.0;
    }
    let mut counts: Vec<usize> = profiles.iter().map(|p| p.tokens_created).collect();
    counts.sort_unstable();
    let m = ((fraction * counts.len() as f64 + 1e-9).floor() as usize).min(counts.len());
    counts[..m].iter().sum::<usize>() as f64 / total as f64
}

pub fn lifetimes_table(records: &[LifetimeRecord]) -> Table {
    let mut t = Table::new(&[
        "subject", "kind", "created_block", "last_event_block", "lifetime_blocks", "lifetime_seconds", "exact_seconds", "class",
    ]);
    for r in records {
        t.push(vec![
            r.subject.to_string(),
            r.kind.as_str().into(),
            r.created_block.number.to_string(),
            r.last_event_block.number.to_string(),
            r.lifetime_blocks.to_string(),
            fmt_f64(r.lifetime_seconds),
            r.exact_seconds.to_string(),
            r.class.as_str().into(),
        ]);
    }
    t
}

pub fn cdf_table(rows: &[CdfRow]) -> Table {
    let mut t = Table::new(&["kind", "point", "seconds", "dead", "fraction"]);
    for r in rows {
        t.push(vec![r.kind.as_str().into(), r.point.clone(), fmt_f64(r.seconds), r.dead.to_string(), fmt_f64(r.fraction)]);
    }
    t
}

pub fn creators_table(profiles: &[CreatorProfile]) -> Table {
    let mut t = Table::new(&["creator", "tokens_created", "via_creation_tx", "via_internal", "one_day_tokens", "is_spammer"]);
    for p in profiles {
        t.push(vec![
            p.creator.to_string(),
            p.tokens_created.to_string(),
            p.via_creation_tx.to_string(),
            p.via_internal.to_string(),
            p.one_day_tokens.to_string(),
            p.is_spammer.to_string(),
        ]);
    }
    t
}

pub fn spammer_summary_table(s: &SpammerSummary) -> Table {
    let mut t = Table::new(&["percentile", "creators", "tokens", "threshold", "spammers", "spammer_tokens", "spammer_share"]);
    t.push(vec![
        fmt_f64(s.percentile),
        s.creators.to_string(),
        s.tokens.to_string(),
        s.threshold.to_string(),
        s.spammers.to_string(),
        s.spammer_tokens.to_string(),
        fmt_f64(s.spammer_share),
    ]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(blocks: u64, secs: Option<u64>) -> LifetimeRecord {
        let created = BlockRef { number: 100, timestamp: secs.map(|_| 0) };
        let last = BlockRef { number: 100 + blocks, timestamp: secs };
        lifetime_of(Address::derive("x"), SubjectKind::Token, created, last, 3.0).unwrap()
    }

    fn profile(i: usize, n: usize) -> CreatorProfile {
        CreatorProfile {
            creator: Address::derive(&format!("c{i}")),
            tokens_created: n,
            via_creation_tx: n,
            via_internal: 0,
            one_day_tokens: 0,
            is_spammer: false,
        }
    }

    #[test]
    fn classes() {
        assert_eq!(rec(0, None).class, LifetimeClass::OneBlock);
        let r = rec(20_000, None);
        assert_eq!((r.lifetime_seconds, r.class), (60_000.0, LifetimeClass::OneDay));
        assert_eq!(rec(28_800, None).class, LifetimeClass::Longer);
        // exact timestamps win over the estimate
        assert_eq!(rec(28_800, Some(86_399)).class, LifetimeClass::OneDay);
    }

    #[test]
    fn negative_lifetime_rejected() {
        let e = lifetime_of(Address::derive("p"), SubjectKind::Pool, BlockRef::new(10), BlockRef::new(9), 3.0);
        assert!(matches!(e, Err(AnalyticsError::NegativeLifetime { .. })));
    }

    #[test]
    fn grid_parsing() {
        let g = default_grid();
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], GridPoint::Blocks(1));
        assert_eq!(g[4], GridPoint::Seconds(86_400));
        assert_eq!(g.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","), "1b,10m,1h,4h,1d,7d,30d,365d");
        assert!(parse_grid("1x").is_err());
        assert_eq!(lifetime_cdf(&[], &parse_grid("1h,10m").unwrap(), 3.0), Err(AnalyticsError::GridOrder));
    }

    #[test]
    fn cdf_steps() {
        let recs = vec![rec(100, None); 5];
        let rows = lifetime_cdf(&recs, &parse_grid("1b,299s,300s,301s").unwrap(), 3.0).unwrap();
        let f: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
        assert_eq!(f, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(lifetime_cdf(&[], &default_grid(), 3.0).unwrap().is_empty());
    }

    #[test]
    fn spammer_ties() {
        let mut ps: Vec<CreatorProfile> = (0..100).map(|i| profile(i, if i == 0 { 60 } else { 1 })).collect();
        let s = flag_spammers(&mut ps, 0.01).unwrap();
        assert_eq!((s.spammers, s.threshold), (1, 60));
        let mut eq: Vec<CreatorProfile> = (0..10).map(|i| profile(i, 3)).collect();
        let s = flag_spammers(&mut eq, 0.01).unwrap();
        assert_eq!((s.spammers, s.threshold), (10, 3));
        assert!(flag_spammers(&mut eq, 0.0).is_err());
        assert_eq!(flag_spammers(&mut [], 0.5), Err(AnalyticsError::NoProfiles));
    }

    #[test]
    fn bottom_share() {
        let ps: Vec<CreatorProfile> = (0..10).map(|i| profile(i, if i < 7 { 1 } else { 11 })).collect();
        assert!((bottom_creator_share(&ps, 0.7) - 7.0 / 40.0).abs() < 1e-12);
    }
}
