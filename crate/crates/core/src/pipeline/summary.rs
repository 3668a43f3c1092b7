use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{sha256_hex, Datasets, RunManifest, FAILED};
use crate::analytics::{LifetimeShares, SpammerSummary, SubjectKind};
use crate::names::{self, Coverage};
use crate::rugpull::VictimStats;
use crate::snipers::SniperStats;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("unreadable manifest: {0}")]
    Manifest(String),
    #[error("the run did not finish: {0}")]
    Failed(String),
    #[error("{0} does not match the manifest hash")]
    HashMismatch(String),
    #[error("manifest lists no summary")]
    NoSummary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub standard: usize,
    pub via_creation_tx: usize,
    pub via_internal: usize,
    pub lp_tokens: usize,
    pub non_compliant: usize,
    pub duplicates: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub pools: usize,
    pub mint: usize,
    pub burn: usize,
    pub swap: usize,
    pub orphans: usize,
    pub undecodable: usize,
    pub duplicate_pairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RugPullCounts {
    pub scanned: usize,
    pub out_of_scope: usize,
    pub detected: usize,
    pub successful: usize,
    pub unsuccessful: usize,
    pub unpriceable: usize,
    pub operator_mismatch: usize,
    pub manipulation: BTreeMap<String, usize>,
    pub victims: VictimStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NameSummary {
    pub coverage: Coverage,
    pub unique_ratio: f64,
}

/// The headline figures of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub chain: String,
    pub start_block: u64,
    pub end_block: u64,
    pub tokens: TokenCounts,
    pub events: EventCounts,
    pub token_lifetimes: LifetimeShares,
    pub pool_lifetimes: LifetimeShares,
    pub spammers: Option<SpammerSummary>,
    pub rugpulls: RugPullCounts,
    pub names: NameSummary,
    pub snipers: SniperStats,
}

impl Summary {
    pub fn from_datasets(d: &Datasets) -> Summary {
        let mut s = Summary::default();
        if let Some(p) = d.profile() {
            s.chain = p.name.clone();
            s.start_block = p.start_block;
            s.end_block = p.end_block;
        }
        for t in d.tokens.standard_tokens() {
            s.tokens.standard += 1;
            if t.creation.via_internal {
                s.tokens.via_internal += 1;
            } else {
                s.tokens.via_creation_tx += 1;
            }
        }
        s.tokens.lp_tokens = d.tokens.lp_count();
        s.tokens.non_compliant = d.tokens.non_compliant;
        s.tokens.duplicates = d.tokens.duplicates.len();
        s.events = EventCounts {
            pools: d.index.pools.len(),
            mint: d.index.count("mint"),
            burn: d.index.count("burn"),
            swap: d.index.count("swap"),
            orphans: d.timelines.orphans.len(),
            undecodable: d.index.errors.len(),
            duplicate_pairs: d.index.duplicate_pairs.len(),
        };
        s.token_lifetimes = crate::analytics::lifetime_shares(&d.lifetimes, SubjectKind::Token);
        s.pool_lifetimes = crate::analytics::lifetime_shares(&d.lifetimes, SubjectKind::Pool);
        s.spammers = d.spammers.clone();
        let r = &d.rugpulls;
        let mut manipulation = BTreeMap::new();
        for rep in &r.reports {
            *manipulation.entry(rep.manipulation.as_str().to_string()).or_default() += 1;
        }
        s.rugpulls = RugPullCounts {
            scanned: r.scanned,
            out_of_scope: r.out_of_scope,
            detected: r.reports.len(),
            successful: r.successful(),
            unsuccessful: r.reports.len() - r.successful(),
            unpriceable: r.unpriceable.len(),
            operator_mismatch: r.reports.iter().filter(|x| x.operator_mismatch).count(),
            manipulation,
            victims: d.victims.clone(),
        };
        s.names = NameSummary {
            coverage: names::coverage(&d.names),
            unique_ratio: names::name_frequency(&d.names).unique_ratio,
        };
        s.snipers = d.sniper_stats.clone();
        s
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

pub fn render_summary(s: &Summary) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "chain {} blocks {}..={}", if s.chain.is_empty() { "-" } else { &s.chain }, s.start_block, s.end_block);
    let t = &s.tokens;
    let _ = writeln!(
        o,
        "tokens      {} standard ({} creation tx, {} internal), {} LP, {} non-compliant",
        t.standard, t.via_creation_tx, t.via_internal, t.lp_tokens, t.non_compliant
    );
    let e = &s.events;
    let _ = writeln!(
        o,
        "events      {} pools, {} mint, {} burn, {} swap, {} orphaned, {} undecodable",
        e.pools, e.mint, e.burn, e.swap, e.orphans, e.undecodable
    );
    for (label, l) in [("token life", &s.token_lifetimes), ("pool life", &s.pool_lifetimes)] {
        let _ = writeln!(o, "{label:<11} {} total, 1-block {}, 1-day {}", l.total, pct(l.one_block_share), pct(l.one_day_share));
    }
    match &s.spammers {
        Some(sp) => {
            let _ = writeln!(
                o,
                "spammers    {} of {} creators (>= {} tokens) made {} of {} tokens ({})",
                sp.spammers, sp.creators, sp.threshold, sp.spammer_tokens, sp.tokens, pct(sp.spammer_share)
            );
        }
        None => {
            let _ = writeln!(o, "spammers    0 of 0 creators");
        }
    }
    let r = &s.rugpulls;
    let manip: Vec<String> = r.manipulation.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let _ = writeln!(
        o,
        "rug pulls   {} detected of {} scanned: {} successful, {} unsuccessful, {} unpriceable{}",
        r.detected,
        r.scanned,
        r.successful,
        r.unsuccessful,
        r.unpriceable,
        if manip.is_empty() { String::new() } else { format!(" [{}]", manip.join(", ")) }
    );
    let _ = writeln!(
        o,
        "victims     {} addresses, {} buys, {} sells ({} buys)",
        r.victims.unique_victims,
        r.victims.buys,
        r.victims.sells,
        pct(r.victims.buy_share)
    );
    let c = &s.names.coverage;
    let _ = writeln!(o, "names       {} of {} categorized ({}), {} unique", c.covered, c.total, pct(c.ratio), pct(s.names.unique_ratio));
    let sn = &s.snipers;
    let _ = writeln!(
        o,
        "snipers     {} of {} traders flagged, {} of {} pools touched ({}), {} of first swaps, {} same-block",
        sn.flagged,
        sn.traders,
        sn.pools_touched,
        sn.pools,
        pct(sn.pool_coverage),
        pct(sn.swap_share),
        pct(sn.same_block_share)
    );
    o
}

/// Verifies every output hash in the run directory, then renders the stored summary.
pub fn emit_summary(dir: &Path) -> Result<String, ReportError> {
    let failed = dir.join(FAILED);
    if failed.exists() {
        let why = std::fs::read_to_string(&failed).unwrap_or_default();
        return Err(ReportError::Failed(why.trim().to_string()));
    }
    let manifest = RunManifest::read(dir)?;
    for (name, hash) in &manifest.outputs {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| ReportError::Io(path.display().to_string(), e))?;
        if sha256_hex(&bytes) != *hash {
            return Err(ReportError::HashMismatch(name.clone()));
        }
    }
    if !manifest.outputs.contains_key("summary.json") {
        return Err(ReportError::NoSummary);
    }
    let bytes = std::fs::read(dir.join("summary.json")).map_err(|e| ReportError::Io("summary.json".into(), e))?;
    let s: Summary = serde_json::from_slice(&bytes).map_err(|e| ReportError::Manifest(e.to_string()))?;
    Ok(render_summary(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_summary_is_all_zero() {
        let text = render_summary(&Summary::from_datasets(&Datasets::default()));
        assert!(text.contains("0 standard"));
        assert!(text.contains("0 detected of 0 scanned"));
        assert!(text.contains("0 of 0 traders flagged"));
    }
}
