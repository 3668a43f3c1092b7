//! Two-step contract gathering: creation transactions first, then every
//! contract that emitted a standard `Transfer` event but had no observed
//! creation transaction (created by another contract).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use tracing::info;

use super::fixture::{FixtureFile, Record};
use super::profile::ChainProfile;
use super::rpc::{BlockRange, FetchError, RpcClient, Transport};
use crate::chain::{Address, BlockRef, Bytes, ContractCreation, EventTopics, Hash32, LogRecord, Topic};
use crate::tokens::{is_compliant, StandardSpec};

#[derive(Clone, Debug)]
pub struct GatherOptions {
    pub topics: Vec<Topic>,
    pub fetch_metadata: bool,
}

impl Default for GatherOptions {
    fn default() -> Self {
        let t = EventTopics::get();
        GatherOptions {
            topics: vec![t.transfer, t.pair_created, t.mint, t.burn, t.swap],
            fetch_metadata: true,
        }
    }
}

/// Creations for `Transfer` emitters that have no creation record.
///
/// The deployer and creation block are taken from the emitter's first
/// observed log, since the creating transaction is internal.
pub fn expand_transfer_emitters<E>(
    creations: &[ContractCreation],
    logs: &[LogRecord],
    transfer_topic: Topic,
    mut code_at: impl FnMut(Address, u64) -> Result<Bytes, E>,
) -> Result<Vec<ContractCreation>, E> {
    let known: HashSet<Address> = creations.iter().map(|c| c.contract).collect();
    let mut first_seen: BTreeMap<Address, &LogRecord> = BTreeMap::new();
    for log in logs {
        if log.topic0 != transfer_topic || known.contains(&log.emitter) {
            continue;
        }
        first_seen
            .entry(log.emitter)
            .and_modify(|f| {
                if log.order_key() < f.order_key() {
                    *f = log;
                }
            })
            .or_insert(log);
    }
    let mut out = Vec::new();
    for (addr, first) in first_seen {
        let code = code_at(addr, first.block.number)?;
        if code.is_empty() {
            continue;
        }
        out.push(ContractCreation {
            contract: addr,
            deployer: first.tx_sender,
            block: first.block,
            index: first.index,
            tx_hash: first.tx_hash,
            via_internal: true,
            bytecode: code,
            gas_used: first.gas_used,
            gas_price: first.gas_price,
            metadata: None,
        });
    }
    Ok(out)
}

/// Orders creations and logs by (block, transaction index, creation-first,
/// log index) and renumbers `index` sequentially within each block.
pub fn merge_records(
    creations: Vec<(u64, ContractCreation)>,
    logs: Vec<(u64, LogRecord)>,
) -> Vec<Record> {
    let mut keyed: Vec<((u64, u64, u8, u64, Address), Record)> =
        Vec::with_capacity(creations.len() + logs.len());
    for (tx_index, c) in creations {
        keyed.push(((c.block.number, tx_index, 0, 0, c.contract), Record::Creation(c)));
    }
    for (tx_index, l) in logs {
        keyed.push(((l.block.number, tx_index, 1, l.index, Address::ZERO), Record::Log(l)));
    }
    keyed.sort_by_key(|a| a.0);
    let mut out = Vec::with_capacity(keyed.len());
    let mut current_block = None;
    let mut next = 0u64;
    for ((block, ..), mut r) in keyed {
        if current_block != Some(block) {
            current_block = Some(block);
            next = 0;
        }
        match &mut r {
            Record::Creation(c) => c.index = next,
            Record::Log(l) => l.index = next,
        }
        next += 1;
        out.push(r);
    }
    out
}

/// Fetches creations, logs, receipts and metadata for the profile's block range.
pub fn gather<T: Transport>(
    client: &RpcClient<T>,
    profile: &ChainProfile,
    opts: &GatherOptions,
) -> Result<FixtureFile, FetchError> {
    let range = BlockRange::new(profile.start_block, profile.end_block);
    let hits = client.fetch_contract_creations(range)?;
    info!(creations = hits.len(), "creation transactions gathered");
    let raw = client.fetch_logs(&opts.topics, range)?;
    info!(logs = raw.len(), "logs gathered");

    let tx_hashes: BTreeSet<Hash32> = raw.iter().map(|l| l.tx_hash).collect();
    let receipts = client.receipts(&tx_hashes)?;
    let blocks: BTreeSet<u64> = raw.iter().map(|l| l.block_number).collect();
    let timestamps = client.block_timestamps(&blocks)?;

    let mut tx_index: HashMap<Hash32, u64> = HashMap::new();
    let mut logs = Vec::with_capacity(raw.len());
    for l in raw {
        let Some(topic0) = l.topic0() else { continue };
        let receipt = receipts.get(&l.tx_hash);
        tx_index.insert(l.tx_hash, l.tx_index);
        let block = match timestamps.get(&l.block_number) {
            Some(ts) => BlockRef::at(l.block_number, *ts),
            None => BlockRef::new(l.block_number),
        };
        logs.push((
            l.tx_index,
            LogRecord {
                emitter: l.address,
                block,
                index: l.log_index,
                tx_hash: l.tx_hash,
                tx_sender: receipt.map_or(Address::ZERO, |r| r.from),
                topic0,
                indexed_topics: l.topics[1..].to_vec(),
                data: l.data,
                gas_used: receipt.map_or(0, |r| r.gas_used),
                gas_price: receipt.map_or(0, |r| r.gas_price),
            },
        ));
    }

    let mut creations: Vec<(u64, ContractCreation)> =
        hits.into_iter().map(|h| (h.tx_index, h.creation)).collect();
    let plain: Vec<ContractCreation> = creations.iter().map(|(_, c)| c.clone()).collect();
    let plain_logs: Vec<LogRecord> = logs.iter().map(|(_, l)| l.clone()).collect();
    let internal = expand_transfer_emitters(
        &plain,
        &plain_logs,
        EventTopics::get().transfer,
        |addr, block| client.get_code(addr, block),
    )?;
    info!(internal = internal.len(), "internal creations recovered from Transfer emitters");
    for c in internal {
        let idx = tx_index.get(&c.tx_hash).copied().unwrap_or(0);
        creations.push((idx, c));
    }

    if opts.fetch_metadata {
        let spec = StandardSpec::for_chain(&profile.name);
        for (_, c) in creations.iter_mut() {
            if is_compliant(&c.bytecode, &spec).compliant {
                c.metadata = Some(client.call_token_metadata(c.contract)?.to_metadata());
            }
        }
    }

    Ok(FixtureFile { profile: profile.clone(), records: merge_records(creations, logs) })
}
