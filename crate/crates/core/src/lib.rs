//! Chain forensics over EVM-style event data.
//!
//! The crate identifies ERC-20/BEP-20 tokens from runtime bytecode, decodes
//! Uniswap-V2-family pool events into per-pool timelines, measures token and
//! pool lifetimes, profiles token creators, detects single-mint/single-burn
//! exit scams with gain accounting, categorizes scam-token names and flags
//! sniper bots. A constant-product AMM simulator produces ground-truth
//! fixtures and value ledgers for every detector.

pub mod amm;
pub mod amount;
pub mod analytics;
pub mod chain;
pub mod ingestion;
pub mod names;
pub mod pipeline;
pub mod pools;
pub mod rugpull;
pub mod snipers;
pub mod tables;
pub mod tokens;

pub use amount::{Amount, SignedAmount};
pub use chain::{
    keccak_selector, keccak_topic, tx_fee, Address, BlockRef, Bytes, ContractCreation, Hash32,
    LogRecord, Selector, TokenMetadata, Topic,
};
pub use ingestion::{ChainProfile, FixtureFile, Record};
pub use pools::{PoolEvent, PoolRecord, PoolTimeline};
pub use rugpull::{Manipulation, RugPullReport};
pub use amm::{PoolState, Scenario};
pub use pipeline::{run_pipeline, PipelineConfig, RunManifest};
