use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{DEFAULT_GRID, DEFAULT_SPAMMER_PERCENTILE};
use crate::chain::Address;
use crate::rugpull::{Scope, DEFAULT_LP_BURN_THRESHOLD};

pub const MAX_WORKERS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SniperScope {
    /// Only pools detected as exit scams.
    ExitScam,
    All,
}

impl std::str::FromStr for SniperScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exit-scam" => Ok(SniperScope::ExitScam),
            "all" => Ok(SniperScope::All),
            other => Err(format!("unknown sniper scope {other:?} (exit-scam|all)")),
        }
    }
}

/// Pipeline settings. Every field has a default so a config file may set any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub scope: Scope,
    /// Quote tokens besides the chain's wrapped native token.
    pub valuable: Vec<Address>,
    /// One address per line; merged into `valuable`.
    pub valuable_file: Option<PathBuf>,
    pub percentile: f64,
    pub grid: String,
    /// Defaults to the chain profile's value.
    pub sniper_delay: Option<u64>,
    pub sniper_pools: Option<usize>,
    pub sniper_scope: SniperScope,
    /// Reference list file or directory; the bundled sample lists otherwise.
    pub lists: Option<PathBuf>,
    pub workers: usize,
    pub factory_labels: BTreeMap<Address, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            out_dir: PathBuf::from("out"),
            threshold: DEFAULT_LP_BURN_THRESHOLD,
            scope: Scope::OneDay,
            valuable: Vec::new(),
            valuable_file: None,
            percentile: DEFAULT_SPAMMER_PERCENTILE,
            grid: DEFAULT_GRID.to_string(),
            sniper_delay: None,
            sniper_pools: None,
            sniper_scope: SniperScope::ExitScam,
            lists: None,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()).min(MAX_WORKERS),
            factory_labels: known_factories(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub fn known_factories() -> BTreeMap<Address, String> {
    [
        ("0xca143ce32fe78f1f7019d7d551a6402fc5350c73", "pancakeswap-v2"),
        ("0xbcfccbde45ce874adcb698cc183debcf17952812", "pancakeswap-v1"),
        ("0x5c69bee701ef814a2b6a3edd4b1652cb9cc5aa6f", "uniswap-v2"),
        ("0xc0aee478e3658e2610c5f7a4a2e1777ce9e4f2ac", "sushiswap"),
    ]
    .into_iter()
    .map(|(a, l)| (a.parse().expect("static address"), l.to_string()))
    .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum AddressListError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: not an address: {text:?}")]
    Parse { path: String, line: usize, text: String },
}

/// One address per line; blank lines and `#` comments are skipped.
pub fn read_address_list(path: &Path) -> Result<Vec<Address>, AddressListError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| AddressListError::Io { path: p.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        out.push(l.parse().map_err(|_| AddressListError::Parse { path: p.clone(), line: i + 1, text: l.to_string() })?);
    }
    Ok(out)
}
