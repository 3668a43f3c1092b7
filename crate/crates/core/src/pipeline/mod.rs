//! Batch pipeline: fixtures in, CSV/JSON datasets and a run manifest out.
//!
//! Stages run in order. Every file a stage writes is hashed into the
//! manifest; on failure the files written so far stay in place next to a
//! `FAILED` marker naming the stage.

mod config;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::info;

pub use config::{known_factories, read_address_list, AddressListError, PipelineConfig, SniperScope, MAX_WORKERS};
pub use summary::{emit_summary, render_summary, ReportError, Summary};

use crate::analytics::{self, CdfRow, CreatorProfile, LifetimeRecord, SpammerSummary};
use crate::chain::Address;
use crate::ingestion::{read_fixture, ChainProfile, FixtureFile};
use crate::names::{self, NameVerdict, ReferenceLists};
use crate::pools::{self, PoolIndex, Timelines};
use crate::rugpull::{self, RugPullAnalysis, RugPullConfig, VictimStats};
use crate::snipers::{self, SniperStats, SniperVerdict, SwapLatency};
use crate::tables::Table;
use crate::tokens::{build_token_dataset, tokens_table, StandardSpec, TokenDataset};

pub const MANIFEST: &str = "manifest.json";
pub const FAILED: &str = "FAILED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    ReadFixtures,
    Tokens,
    Pools,
    StripLp,
    Lifetimes,
    Spammers,
    Rugpulls,
    Names,
    Snipers,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::ReadFixtures,
        Stage::Tokens,
        Stage::Pools,
        Stage::StripLp,
        Stage::Lifetimes,
        Stage::Spammers,
        Stage::Rugpulls,
        Stage::Names,
        Stage::Snipers,
        Stage::Report,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::ReadFixtures => "read-fixtures",
            Stage::Tokens => "tokens",
            Stage::Pools => "pools",
            Stage::StripLp => "strip-lp",
            Stage::Lifetimes => "lifetimes",
            Stage::Spammers => "spammers",
            Stage::Rugpulls => "rugpulls",
            Stage::Names => "names",
            Stage::Snipers => "snipers",
            Stage::Report => "report",
        }
    }

    pub fn index(&self) -> usize {
        Stage::ALL.iter().position(|s| s == self).expect("listed")
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {index} ({stage}) failed: {message}")]
    Stage { stage: Stage, index: usize, message: String },
}

impl PipelineError {
    fn at(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Stage { stage, index: stage.index(), message: e.to_string() }
    }

    /// Bad configuration or unreadable fixtures, as opposed to a failure inside the analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PipelineError::Config(_) | PipelineError::Stage { stage: Stage::ReadFixtures, .. })
    }
}

/// Resolved settings recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub threshold: f64,
    pub scope: rugpull::Scope,
    pub valuable: Vec<Address>,
    pub percentile: f64,
    pub grid: String,
    pub sniper_delay: u64,
    pub sniper_pools: usize,
    pub sniper_scope: SniperScope,
    pub lists: String,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub profile: ChainProfile,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    pub settings: Settings,
    /// Output file name → sha256.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<Stage>,
    pub duration_ms: u64,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<RunManifest, ReportError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read(&path).map_err(|e| ReportError::Io(path.display().to_string(), e))?;
        serde_json::from_slice(&text).map_err(|e| ReportError::Manifest(e.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything the stages produce, kept in memory for callers and tests.
#[derive(Default)]
pub struct Datasets {
    pub fixture: Option<FixtureFile>,
    pub tokens: TokenDataset,
    pub index: PoolIndex,
    pub timelines: Timelines,
    pub lifetimes: Vec<LifetimeRecord>,
    pub cdf: Vec<CdfRow>,
    pub creators: Vec<CreatorProfile>,
    pub spammers: Option<SpammerSummary>,
    pub rugpulls: RugPullAnalysis,
    pub victims: VictimStats,
    pub names: Vec<NameVerdict>,
    pub latencies: Vec<SwapLatency>,
    pub snipers: Vec<SniperVerdict>,
    pub sniper_stats: SniperStats,
    pub summary: Summary,
}

impl Datasets {
    pub fn profile(&self) -> Option<&ChainProfile> {
        self.fixture.as_ref().map(|f| &f.profile)
    }
}

/// Which stages write their files.
#[derive(Clone, Debug)]
pub enum Emit {
    All,
    Only(BTreeSet<Stage>),
    /// Compute every stage, write nothing.
    Nothing,
}

impl Emit {
    fn wants(&self, s: Stage) -> bool {
        match self {
            Emit::All => true,
            Emit::Only(set) => set.contains(&s),
            Emit::Nothing => false,
        }
    }
}

pub struct Pipeline {
    cfg: PipelineConfig,
    emit: Emit,
    write_manifest: bool,
    written: BTreeMap<String, String>,
    completed: Vec<Stage>,
    preloaded: Option<FixtureFile>,
}

pub fn load_fixtures(paths: &[PathBuf]) -> Result<FixtureFile, String> {
    if paths.is_empty() {
        return Err("no fixture inputs given".into());
    }
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        files.push(read_fixture(p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    if files.len() == 1 {
        return Ok(files.pop().expect("one file"));
    }
    FixtureFile::merge(files).map_err(|e| e.to_string())
}

fn valuable_set(cfg: &PipelineConfig, profile: &ChainProfile) -> Result<Vec<Address>, PipelineError> {
    let mut set: BTreeSet<Address> = cfg.valuable.iter().copied().collect();
    if let Some(p) = &cfg.valuable_file {
        set.extend(read_address_list(p).map_err(|e| PipelineError::Config(e.to_string()))?);
    }
    set.extend(profile.wrapped_native_token);
    Ok(set.into_iter().collect())
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        Pipeline { cfg, emit: Emit::All, write_manifest: true, written: BTreeMap::new(), completed: Vec::new(), preloaded: None }
    }

    /// Runs every stage over an already loaded fixture, keeping results in memory only.
    pub fn in_memory(cfg: PipelineConfig, fixture: FixtureFile) -> Self {
        Pipeline { emit: Emit::Nothing, write_manifest: false, preloaded: Some(fixture), ..Pipeline::new(cfg) }
    }

    /// Runs the stages needed by `emit` and writes only their files, without a manifest.
    pub fn partial(cfg: PipelineConfig, emit: BTreeSet<Stage>) -> Self {
        Pipeline { emit: Emit::Only(emit), write_manifest: false, ..Pipeline::new(cfg) }
    }

    fn last_stage(&self) -> Stage {
        match &self.emit {
            Emit::All | Emit::Nothing => Stage::Report,
            Emit::Only(s) => s.iter().max().copied().unwrap_or(Stage::ReadFixtures),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn write_bytes(&mut self, stage: Stage, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        if !self.emit.wants(stage) {
            return Ok(());
        }
        std::fs::write(self.out(name), bytes).map_err(|e| PipelineError::at(stage, format!("writing {name}: {e}")))?;
        self.written.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_table(&mut self, stage: Stage, name: &str, t: &Table) -> Result<(), PipelineError> {
        self.write_bytes(stage, name, &t.to_csv())
    }

    fn write_json<T: Serialize>(&mut self, stage: Stage, name: &str, v: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| PipelineError::at(stage, e))?;
        bytes.push(b'\n');
        self.write_bytes(stage, name, &bytes)
    }

    /// Runs every stage; returns the manifest and the in-memory datasets.
    pub fn run(mut self) -> Result<(RunManifest, Datasets), PipelineError> {
        let started = Instant::now();
        let writes = !matches!(self.emit, Emit::Nothing);
        if writes {
            std::fs::create_dir_all(&self.cfg.out_dir)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", self.cfg.out_dir.display())))?;
            let _ = std::fs::remove_file(self.out(FAILED));
        }
        let workers = self.cfg.workers.clamp(1, MAX_WORKERS);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut data = Datasets::default();
        let result = pool.install(|| self.stages(&mut data));
        let settings = match result {
            Ok(s) => s,
            Err(e) => {
                if writes {
                    let _ = std::fs::write(self.out(FAILED), format!("{e}\n"));
                }
                return Err(e);
            }
        };
        let mut inputs = BTreeMap::new();
        for p in &self.cfg.inputs {
            let bytes = std::fs::read(p).map_err(|e| PipelineError::at(Stage::ReadFixtures, e))?;
            inputs.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        let manifest = RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            profile: data.profile().cloned().expect("fixtures were read"),
            inputs,
            settings,
            outputs: std::mem::take(&mut self.written),
            stages: self.completed.clone(),
            duration_ms: started.elapsed().as_millis() as u64,
        };
        if self.write_manifest {
            let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            std::fs::write(self.out(MANIFEST), bytes).map_err(|e| PipelineError::at(Stage::Report, e))?;
        }
        Ok((manifest, data))
    }

    fn done(&mut self, s: Stage) -> bool {
        self.completed.push(s);
        info!(stage = s.as_str(), "stage complete");
        s >= self.last_stage()
    }

    fn stages(&mut self, d: &mut Datasets) -> Result<Settings, PipelineError> {
        use Stage::*;
        let fixture = match self.preloaded.take() {
            Some(f) => f,
            None => load_fixtures(&self.cfg.inputs).map_err(|e| PipelineError::at(ReadFixtures, e))?,
        };
        let profile = fixture.profile.clone();
        let valuable = valuable_set(&self.cfg, &profile)?;
        let grid = analytics::parse_grid(&self.cfg.grid).map_err(|e| PipelineError::Config(e.to_string()))?;
        let lists = match &self.cfg.lists {
            Some(p) => ReferenceLists::load(p).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => ReferenceLists::sample(),
        };
        let settings = Settings {
            threshold: self.cfg.threshold,
            scope: self.cfg.scope,
            valuable: valuable.clone(),
            percentile: self.cfg.percentile,
            grid: self.cfg.grid.clone(),
            sniper_delay: self.cfg.sniper_delay.unwrap_or(profile.sniper_delay_blocks),
            sniper_pools: self.cfg.sniper_pools.unwrap_or(profile.sniper_min_pools),
            sniper_scope: self.cfg.sniper_scope,
            lists: self.cfg.lists.as_ref().map_or("bundled".to_string(), |p| p.display().to_string()),
            workers: self.cfg.workers.clamp(1, MAX_WORKERS),
        };
        d.fixture = Some(fixture);
        if self.done(ReadFixtures) {
            return Ok(settings);
        }
        let fx = d.fixture.as_ref().expect("set above");
        let creations: Vec<_> = fx.creations().cloned().collect();
        let logs: Vec<_> = fx.logs().cloned().collect();

        let spec = StandardSpec::for_chain(&profile.name);
        d.tokens = build_token_dataset(&creations, &logs, &spec, &Default::default());
        if self.done(Tokens) {
            return Ok(settings);
        }

        d.index = pools::index_logs(&logs);
        d.timelines = pools::assemble_timelines(&d.index.pools, d.index.events.iter().cloned());
        let labels = &self.cfg.factory_labels.clone();
        let (mint, burn, swap) = pools::event_tables(&d.index.events);
        self.write_table(Pools, "pools.csv", &pools::pools_table(&d.index.pools, labels))?;
        self.write_table(Pools, "events_mint.csv", &mint)?;
        self.write_table(Pools, "events_burn.csv", &burn)?;
        self.write_table(Pools, "events_swap.csv", &swap)?;
        self.write_table(Pools, "factories.csv", &pools::factories_table(&d.index, labels))?;
        self.write_table(Pools, "orphans.csv", &pools::orphans_table(&d.timelines.orphans))?;
        if self.done(Pools) {
            return Ok(settings);
        }

        let pool_set: BTreeSet<Address> = d.index.pools.iter().map(|p| p.pool).collect();
        for t in &mut d.tokens.tokens {
            t.is_lp_token = pool_set.contains(&t.address);
        }
        self.write_table(StripLp, "tokens.csv", &tokens_table(&d.tokens))?;
        if self.done(StripLp) {
            return Ok(settings);
        }

        d.lifetimes = analytics::compute_lifetimes(&d.tokens, &d.index.pools, &profile).map_err(|e| PipelineError::at(Lifetimes, e))?;
        d.cdf = analytics::lifetime_cdf(&d.lifetimes, &grid, profile.mean_block_interval).map_err(|e| PipelineError::at(Lifetimes, e))?;
        self.write_table(Lifetimes, "lifetimes.csv", &analytics::lifetimes_table(&d.lifetimes))?;
        self.write_table(Lifetimes, "lifetime_cdf.csv", &analytics::cdf_table(&d.cdf))?;
        if self.done(Lifetimes) {
            return Ok(settings);
        }

        d.creators = analytics::creator_profiles(&d.tokens, &d.lifetimes);
        d.spammers = if d.creators.is_empty() {
            None
        } else {
            Some(analytics::flag_spammers(&mut d.creators, self.cfg.percentile).map_err(|e| PipelineError::at(Spammers, e))?)
        };
        self.write_table(Spammers, "creators.csv", &analytics::creators_table(&d.creators))?;
        let spam_table = match &d.spammers {
            Some(s) => analytics::spammer_summary_table(s),
            None => analytics::spammer_summary_table(&SpammerSummary {
                percentile: self.cfg.percentile,
                creators: 0,
                tokens: 0,
                threshold: 0,
                spammers: 0,
                spammer_tokens: 0,
                spammer_share: 0.0,
            }),
        };
        self.write_table(Spammers, "spammers.csv", &spam_table)?;
        if self.done(Spammers) {
            return Ok(settings);
        }

        let by_addr: HashMap<Address, _> = d.tokens.by_address();
        let rcfg = RugPullConfig { threshold: self.cfg.threshold, scope: self.cfg.scope, valuable: valuable.iter().copied().collect() };
        d.rugpulls = rugpull::analyze(&d.timelines.timelines, &by_addr, &d.lifetimes, &rcfg).map_err(|e| PipelineError::at(Rugpulls, e))?;
        d.victims = rugpull::victim_stats(&d.rugpulls.reports);
        self.write_table(Rugpulls, "rugpulls.csv", &rugpull::reports_table(&d.rugpulls.reports))?;
        self.write_json(Rugpulls, "rugpulls.json", &d.rugpulls.reports)?;
        self.write_table(Rugpulls, "victims.csv", &rugpull::victim_stats_table(&d.victims))?;
        if self.done(Rugpulls) {
            return Ok(settings);
        }

        let scam_names: Vec<(Address, String)> = d
            .rugpulls
            .reports
            .iter()
            .filter_map(|r| by_addr.get(&r.scam_token).and_then(|t| t.metadata.name.clone()).map(|n| (r.scam_token, n)))
            .collect();
        d.names = names::classify_all(&scam_names, &lists);
        self.write_table(Names, "names.csv", &names::verdicts_table(&d.names))?;
        self.write_table(Names, "name_frequency.csv", &names::frequency_table(&names::name_frequency(&d.names)))?;
        self.write_table(Names, "name_coverage.csv", &names::coverage_table(&names::coverage(&d.names)))?;
        if self.done(Names) {
            return Ok(settings);
        }

        let scope_pools: Option<BTreeSet<Address>> = match self.cfg.sniper_scope {
            SniperScope::ExitScam => Some(d.rugpulls.pools()),
            SniperScope::All => None,
        };
        d.latencies = snipers::swap_latencies(&d.timelines.timelines, scope_pools.as_ref()).map_err(|e| PipelineError::at(Snipers, e))?;
        d.snipers = snipers::flag_snipers(&d.latencies, settings.sniper_delay, settings.sniper_pools).map_err(|e| PipelineError::at(Snipers, e))?;
        let n_pools = scope_pools.as_ref().map_or(d.timelines.timelines.len(), |s| s.len());
        d.sniper_stats = snipers::sniper_activity_stats(&d.snipers, &d.latencies, n_pools);
        let flagged: Vec<SniperVerdict> = d.snipers.iter().filter(|v| v.flagged).cloned().collect();
        self.write_table(Snipers, "snipers.csv", &snipers::verdicts_table(&flagged))?;
        self.write_table(Snipers, "sniper_scatter.csv", &snipers::scatter_table(&d.snipers))?;
        self.write_table(Snipers, "sniper_stats.csv", &snipers::stats_table(&d.sniper_stats))?;
        if self.done(Snipers) {
            return Ok(settings);
        }

        d.summary = Summary::from_datasets(d);
        self.write_json(Report, "summary.json", &d.summary)?;
        self.write_bytes(Report, "summary.txt", render_summary(&d.summary).as_bytes())?;
        self.done(Report);
        Ok(settings)
    }
}

/// Full run with a manifest.
pub fn run_pipeline(cfg: PipelineConfig) -> Result<RunManifest, PipelineError> {
    Pipeline::new(cfg).run().map(|(m, _)| m)
}

