use std::collections::BTreeSet;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use tracing::{info, warn};

use poolsleuth::amm::scenarios::{
    detection_population, lifetime_population, onlyfans_case, random_rug_scenario, sniper_population, spammer_population,
    synthetic_chain,
};
use poolsleuth::amm::{parse_scenario, run_scenario};
use poolsleuth::ingestion::{gather, write_fixture, GatherOptions, HttpTransport, RpcClient, RpcConfig};
use poolsleuth::pipeline::{emit_summary, Pipeline, PipelineError, SniperScope, Stage};
use poolsleuth::rugpull::Scope;
use poolsleuth::{Address, ChainProfile, PipelineConfig, Scenario};

#[derive(Parser, Debug)]
#[command(name = "poolsleuth", version, about = "Token, pool and exit-scam forensics over EVM event fixtures")]
struct Cli {
    /// More log output on stderr (-v debug, -vv trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log warnings and errors
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch creations, logs and token metadata from a JSON-RPC node into a fixture file
    Ingest(IngestArgs),
    /// Run a market scenario and write the resulting fixture
    Simulate(SimulateArgs),
    /// Identify token contracts (tokens.csv)
    Tokens(Common),
    /// Index pools and their Mint/Burn/Swap events
    Pools(Common),
    /// Token and pool lifetimes with the lifetime CDF
    Lifetimes {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        life: LifetimeArgs,
    },
    /// Creator statistics and token spammers
    Spammers {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spam: SpamArgs,
    },
    /// Exit-scam detection and gain accounting
    Rugpulls {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rug: RugArgs,
    },
    /// Name categories of exit-scam tokens
    Names {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rug: RugArgs,
        #[command(flatten)]
        names: NameArgs,
    },
    /// First-swap latencies and sniper bots
    Snipers {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rug: RugArgs,
        #[command(flatten)]
        snipers: SniperArgs,
    },
    /// Verify a finished run directory and print its summary
    Report {
        /// Output directory of a `pipeline` run
        dir: PathBuf,
    },
    /// Run every stage and write a manifest
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        life: LifetimeArgs,
        #[command(flatten)]
        spam: SpamArgs,
        #[command(flatten)]
        rug: RugArgs,
        #[command(flatten)]
        names: NameArgs,
        #[command(flatten)]
        snipers: SniperArgs,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Fixture files (JSON lines); several are merged
    #[arg(short, long = "input", value_name = "FILE")]
    inputs: Vec<PathBuf>,
    /// Output directory
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// TOML configuration; flags given on the command line win
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (at most 8)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct LifetimeArgs {
    /// CDF grid, e.g. "1b,10m,1h,24h,7d"
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct SpamArgs {
    /// Share of creators flagged as spammers
    #[arg(long)]
    percentile: Option<f64>,
}

#[derive(Args, Debug)]
struct RugArgs {
    /// Minimum burned/minted LP ratio
    #[arg(long)]
    threshold: Option<f64>,
    /// Pools analysed: one-day or all
    #[arg(long)]
    scope: Option<Scope>,
    /// Extra quote tokens (wrapped native coin is always included)
    #[arg(long = "valuable", value_name = "ADDRESS")]
    valuable: Vec<Address>,
    /// File with one quote-token address per line
    #[arg(long, value_name = "FILE")]
    valuable_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NameArgs {
    /// Reference list CSV file or directory of CSV files
    #[arg(long, value_name = "PATH")]
    lists: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SniperArgs {
    /// Mean first-swap delay bound in blocks
    #[arg(long)]
    sniper_delay: Option<u64>,
    /// Minimum pools a trader must have swapped in
    #[arg(long)]
    sniper_pools: Option<usize>,
    /// Pools examined: exit-scam or all
    #[arg(long)]
    sniper_scope: Option<SniperScope>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// JSON-RPC endpoint
    #[arg(long, env = "POOLSLEUTH_RPC_URL")]
    rpc_url: String,
    /// Chain preset (bsc, ethereum) or a custom name
    #[arg(long, default_value = "bsc")]
    chain: String,
    #[arg(long)]
    from: u64,
    #[arg(long)]
    to: u64,
    /// Fixture file to write
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
    /// Blocks per eth_getLogs request
    #[arg(long, default_value_t = 2_000)]
    window: u64,
    /// Requests per JSON-RPC batch
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = 5)]
    retries: u32,
    /// Request timeout in seconds
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Skip name/symbol/decimals calls
    #[arg(long)]
    no_metadata: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON file
    #[arg(conflicts_with = "builtin", required_unless_present = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: onlyfans, random-rug:SEED, detection:SEED, snipers:SEED,
    /// spammers:SEED, lifetimes:SEED, synthetic:SEED:RECORDS
    #[arg(long)]
    builtin: Option<String>,
    /// Fixture file to write
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the ledger flows and gas tables into this directory
    #[arg(long, value_name = "DIR")]
    ledger: Option<PathBuf>,
}

/// Failure classes, one per exit code.
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Stage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Stage(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Input(e) | Failure::Stage(e) => e,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.into())
        } else {
            Failure::Stage(e.into())
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("POOLSLEUTH_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Simulate(a) => simulate(a),
        Command::Tokens(c) => stage(base_config(&c)?, Stage::StripLp),
        Command::Pools(c) => stage(base_config(&c)?, Stage::Pools),
        Command::Lifetimes { common, life } => {
            let mut cfg = base_config(&common)?;
            life.apply(&mut cfg);
            stage(cfg, Stage::Lifetimes)
        }
        Command::Spammers { common, spam } => {
            let mut cfg = base_config(&common)?;
            spam.apply(&mut cfg);
            stage(cfg, Stage::Spammers)
        }
        Command::Rugpulls { common, rug } => {
            let mut cfg = base_config(&common)?;
            rug.apply(&mut cfg);
            stage(cfg, Stage::Rugpulls)
        }
        Command::Names { common, rug, names } => {
            let mut cfg = base_config(&common)?;
            rug.apply(&mut cfg);
            names.apply(&mut cfg);
            stage(cfg, Stage::Names)
        }
        Command::Snipers { common, rug, snipers } => {
            let mut cfg = base_config(&common)?;
            rug.apply(&mut cfg);
            snipers.apply(&mut cfg);
            stage(cfg, Stage::Snipers)
        }
        Command::Report { dir } => {
            let text = emit_summary(&dir).map_err(|e| Failure::Input(e.into()))?;
            print!("{text}");
            Ok(())
        }
        Command::Pipeline { common, life, spam, rug, names, snipers } => {
            let mut cfg = base_config(&common)?;
            life.apply(&mut cfg);
            spam.apply(&mut cfg);
            rug.apply(&mut cfg);
            names.apply(&mut cfg);
            snipers.apply(&mut cfg);
            let out = cfg.out_dir.clone();
            let m = Pipeline::new(cfg).run()?.0;
            info!(outputs = m.outputs.len(), duration_ms = m.duration_ms, dir = %out.display(), "pipeline finished");
            Ok(())
        }
    }
}

fn base_config(c: &Common) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Input)?;
            PipelineConfig::from_toml(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Usage)?
        }
        None => PipelineConfig::default(),
    };
    if !c.inputs.is_empty() {
        cfg.inputs = c.inputs.clone();
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if cfg.inputs.is_empty() {
        return Err(Failure::Usage(anyhow!("no input fixtures: pass --input or set `inputs` in the config file")));
    }
    Ok(cfg)
}

impl LifetimeArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
    }
}

impl SpamArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if let Some(p) = self.percentile {
            cfg.percentile = p;
        }
    }
}

impl RugArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(s) = self.scope {
            cfg.scope = s;
        }
        if !self.valuable.is_empty() {
            cfg.valuable = self.valuable;
        }
        if self.valuable_file.is_some() {
            cfg.valuable_file = self.valuable_file;
        }
    }
}

impl NameArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if self.lists.is_some() {
            cfg.lists = self.lists;
        }
    }
}

impl SniperArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        if self.sniper_delay.is_some() {
            cfg.sniper_delay = self.sniper_delay;
        }
        if self.sniper_pools.is_some() {
            cfg.sniper_pools = self.sniper_pools;
        }
        if let Some(s) = self.sniper_scope {
            cfg.sniper_scope = s;
        }
    }
}

fn stage(cfg: PipelineConfig, s: Stage) -> Result<(), Failure> {
    let out = cfg.out_dir.clone();
    let (m, _) = Pipeline::partial(cfg, BTreeSet::from([s])).run()?;
    for name in m.outputs.keys() {
        info!(file = %out.join(name).display(), "wrote");
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<(), Failure> {
    if a.from > a.to {
        return Err(Failure::Usage(anyhow!("--from {} is after --to {}", a.from, a.to)));
    }
    let profile = ChainProfile::preset(&a.chain, a.from, a.to);
    let transport = HttpTransport::new(&a.rpc_url, Duration::from_secs(a.timeout));
    let config = RpcConfig { window: a.window, batch_size: a.batch, workers: a.workers, max_retries: a.retries, ..RpcConfig::default() };
    let client = RpcClient::new(transport, config);
    let opts = GatherOptions { fetch_metadata: !a.no_metadata, ..GatherOptions::default() };
    let fixture = gather(&client, &profile, &opts).map_err(|e| Failure::Input(anyhow!(e)))?;
    write_fixture(&a.out, &fixture.profile, &fixture.records)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::Input)?;
    info!(records = fixture.records.len(), file = %a.out.display(), "fixture written");
    Ok(())
}

fn builtin(spec: &str) -> anyhow::Result<Scenario> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let mut num = |what: &str| -> anyhow::Result<u64> {
        let v = parts.next().ok_or_else(|| anyhow!("{name} needs a {what}, e.g. {name}:1"))?;
        v.parse().with_context(|| format!("bad {what} {v:?}"))
    };
    Ok(match name {
        "onlyfans" => onlyfans_case(),
        "random-rug" => random_rug_scenario(num("seed")?).0,
        "detection" => detection_population(num("seed")?, 300, 200).0,
        "snipers" => sniper_population(num("seed")?).0,
        "spammers" => spammer_population(num("seed")?).0,
        "lifetimes" => lifetime_population(num("seed")?, 155, 437, 408),
        "synthetic" => {
            let seed = num("seed")?;
            synthetic_chain(seed, num("record count")? as usize)
        }
        other => return Err(anyhow!("unknown built-in scenario {other:?}")),
    })
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let scenario = match (&a.scenario, &a.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Input)?;
            parse_scenario(&text).with_context(|| format!("parsing {}", path.display())).map_err(Failure::Input)?
        }
        (None, Some(b)) => builtin(b).map_err(Failure::Usage)?,
        (None, None) => unreachable!("clap requires one of the two"),
    };
    let sim = run_scenario(&scenario).map_err(|e| Failure::Stage(anyhow!(e)))?;
    if let Err(e) = sim.ledger.check_conservation() {
        warn!("ledger does not balance: {e}");
    }
    write_fixture(&a.out, &sim.fixture.profile, &sim.fixture.records)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(Failure::Input)?;
    if let Some(dir) = &a.ledger {
        write_ledger(dir, &sim.ledger).map_err(Failure::Input)?;
    }
    info!(records = sim.fixture.records.len(), file = %a.out.display(), "fixture written");
    Ok(())
}

fn write_ledger(dir: &Path, ledger: &poolsleuth::amm::Ledger) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("ledger_flows.csv"), ledger.flows_table().to_csv())?;
    std::fs::write(dir.join("ledger_gas.csv"), ledger.gas_table().to_csv())?;
    Ok(())
}
