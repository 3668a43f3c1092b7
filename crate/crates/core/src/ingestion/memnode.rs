//! An in-memory JSON-RPC node backed by a fixture.
//!
//! Answers the method families the ingester uses (`eth_getLogs`,
//! `eth_getBlockByNumber`, `eth_getTransactionReceipt`, `eth_call`,
//! `eth_getCode`, `eth_blockNumber`) so ingestion can be exercised offline.
//! Provider quirks can be switched on: a block-range limit on log queries
//! and a number of injected transport failures.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};

use super::fixture::{FixtureFile, Record};
use super::metadata::encode_string_return;
use super::rpc::{hex_quantity, quantity, RpcError, RpcRequest, RpcResult, Transport, TransportError};
use crate::chain::{keccak_selector, signatures as sig, Address, Bytes, Hash32, LogRecord, TokenMetadata, Topic};

#[derive(Clone, Debug)]
struct Tx {
    hash: Hash32,
    from: Address,
    to: Option<Address>,
    creates: Option<Address>,
    gas_used: u64,
    gas_price: u64,
    block: u64,
    index: u64,
}

#[derive(Clone, Debug, Default)]
struct Block {
    timestamp: Option<u64>,
    txs: Vec<Hash32>,
}

#[derive(Clone, Debug)]
struct NodeLog {
    log: LogRecord,
    tx_index: u64,
    log_index: u64,
}

/// Reply style when a log query exceeds the block-range limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeLimitStyle {
    /// Message states the limit ("max N blocks").
    WithHint,
    /// Message gives no number; the client has to bisect.
    Opaque,
}

pub struct MemNode {
    head: u64,
    first: u64,
    blocks: BTreeMap<u64, Block>,
    txs: HashMap<Hash32, Tx>,
    logs: Vec<NodeLog>,
    code: HashMap<Address, (u64, Bytes)>,
    metadata: HashMap<Address, TokenMetadata>,
    range_limit: Option<(u64, RangeLimitStyle)>,
    fail_next: AtomicUsize,
    calls: Mutex<BTreeMap<String, usize>>,
}

impl MemNode {
    pub fn from_fixture(f: &FixtureFile) -> Self {
        let mut blocks: BTreeMap<u64, Block> = BTreeMap::new();
        let mut txs: HashMap<Hash32, Tx> = HashMap::new();
        let mut logs = Vec::new();
        let mut code = HashMap::new();
        let mut metadata = HashMap::new();
        let mut log_counter: HashMap<u64, u64> = HashMap::new();
        for r in &f.records {
            let (block_ref, hash, from, gas_used, gas_price) = match r {
                Record::Creation(c) => (c.block, c.tx_hash, c.deployer, c.gas_used, c.gas_price),
                Record::Log(l) => (l.block, l.tx_hash, l.tx_sender, l.gas_used, l.gas_price),
            };
            let block = blocks.entry(block_ref.number).or_default();
            if block.timestamp.is_none() {
                block.timestamp = block_ref.timestamp;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = txs.entry(hash) {
                let index = block.txs.len() as u64;
                block.txs.push(hash);
                e.insert(Tx {
                        hash,
                        from,
                        to: None,
                        creates: None,
                        gas_used,
                        gas_price,
                        block: block_ref.number,
                        index,
                    });
            }
            let tx = txs.get_mut(&hash).expect("inserted above");
            match r {
                Record::Creation(c) => {
                    code.insert(c.contract, (c.block.number, c.bytecode.clone()));
                    if let Some(m) = &c.metadata {
                        metadata.insert(c.contract, m.clone());
                    }
                    if c.via_internal {
                        if tx.to.is_none() && tx.creates.is_none() {
                            tx.to = Some(Address::derive("memnode:factory-call"));
                        }
                    } else {
                        tx.creates = Some(c.contract);
                        tx.to = None;
                    }
                }
                Record::Log(l) => {
                    if tx.to.is_none() && tx.creates.is_none() {
                        tx.to = Some(l.emitter);
                    }
                    let counter = log_counter.entry(l.block.number).or_insert(0);
                    logs.push(NodeLog { log: l.clone(), tx_index: tx.index, log_index: *counter });
                    *counter += 1;
                }
            }
        }
        MemNode {
            head: f.profile.end_block,
            first: f.profile.start_block,
            blocks,
            txs,
            logs,
            code,
            metadata,
            range_limit: None,
            fail_next: AtomicUsize::new(0),
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_range_limit(mut self, blocks: u64, style: RangeLimitStyle) -> Self {
        self.range_limit = Some((blocks, style));
        self
    }

    /// The next `n` batches fail at the transport level.
    pub fn fail_next(&self, n: usize) {
        self.fail_next.store(n, Ordering::SeqCst);
    }

    /// Successful calls per method so far.
    pub fn call_count(&self, method: &str) -> usize {
        self.calls.lock().unwrap().get(method).copied().unwrap_or(0)
    }

    fn count(&self, method: &str) {
        *self.calls.lock().unwrap().entry(method.to_string()).or_insert(0) += 1;
    }

    fn revert() -> RpcError {
        RpcError { code: 3, message: "execution reverted".into() }
    }

    fn bad_params(detail: &str) -> RpcError {
        RpcError { code: -32602, message: format!("invalid params: {detail}") }
    }

    fn block_param(&self, v: Option<&Value>) -> Result<u64, RpcError> {
        match v {
            Some(Value::String(s)) if s == "latest" || s == "pending" => Ok(self.head),
            Some(Value::String(s)) if s == "earliest" => Ok(self.first),
            Some(v) => quantity(v, "block").map_err(|e| Self::bad_params(&e.to_string())),
            None => Ok(self.head),
        }
    }

    fn log_json(&self, n: &NodeLog) -> Value {
        let mut topics = vec![n.log.topic0.to_string()];
        topics.extend(n.log.indexed_topics.iter().map(|t| t.to_string()));
        json!({
            "address": n.log.emitter.to_string(),
            "topics": topics,
            "data": n.log.data.to_string(),
            "blockNumber": hex_quantity(n.log.block.number),
            "transactionHash": n.log.tx_hash.to_string(),
            "transactionIndex": hex_quantity(n.tx_index),
            "logIndex": hex_quantity(n.log_index),
            "removed": false,
        })
    }

    fn get_logs(&self, params: &Value) -> RpcResult {
        let filter = params.get(0).ok_or_else(|| Self::bad_params("missing filter"))?;
        let from = self.block_param(filter.get("fromBlock"))?;
        let to = self.block_param(filter.get("toBlock"))?;
        if from > to {
            return Ok(json!([]));
        }
        if let Some((limit, style)) = self.range_limit {
            if to - from + 1 > limit {
                let message = match style {
                    RangeLimitStyle::WithHint => format!("block range is too wide; max {limit} blocks"),
                    RangeLimitStyle::Opaque => "block range too large".to_string(),
                };
                return Err(RpcError { code: -32005, message });
            }
        }
        let topic_set: Option<Vec<Topic>> = match filter.get("topics").and_then(|t| t.get(0)) {
            Some(Value::Array(a)) => Some(a.iter().filter_map(|t| t.as_str()?.parse().ok()).collect()),
            Some(Value::String(s)) => Some(s.parse().ok().into_iter().collect()),
            _ => None,
        };
        let address: Option<Address> = filter.get("address").and_then(|a| a.as_str()?.parse().ok());
        let out: Vec<Value> = self
            .logs
            .iter()
            .filter(|n| (from..=to).contains(&n.log.block.number))
            .filter(|n| topic_set.as_ref().is_none_or(|s| s.contains(&n.log.topic0)))
            .filter(|n| address.is_none_or(|a| a == n.log.emitter))
            .map(|n| self.log_json(n))
            .collect();
        Ok(Value::Array(out))
    }

    fn tx_json(&self, tx: &Tx) -> Value {
        json!({
            "hash": tx.hash.to_string(),
            "from": tx.from.to_string(),
            "to": tx.to.map(|a| a.to_string()),
            "gas": hex_quantity(tx.gas_used),
            "gasPrice": hex_quantity(tx.gas_price),
            "blockNumber": hex_quantity(tx.block),
            "transactionIndex": hex_quantity(tx.index),
        })
    }

    fn get_block(&self, params: &Value) -> RpcResult {
        let n = self.block_param(params.get(0))?;
        let full = params.get(1).and_then(Value::as_bool).unwrap_or(false);
        if n < self.first || n > self.head {
            return Ok(Value::Null);
        }
        let empty = Block::default();
        let block = self.blocks.get(&n).unwrap_or(&empty);
        let txs: Vec<Value> = block
            .txs
            .iter()
            .map(|h| if full { self.tx_json(&self.txs[h]) } else { json!(h.to_string()) })
            .collect();
        let mut v = json!({
            "number": hex_quantity(n),
            "hash": Hash32(crate::chain::keccak256(&n.to_be_bytes())).to_string(),
            "transactions": txs,
        });
        if let Some(ts) = block.timestamp {
            v["timestamp"] = json!(hex_quantity(ts));
        }
        Ok(v)
    }

    fn get_receipt(&self, params: &Value) -> RpcResult {
        let hash: Hash32 = params
            .get(0)
            .and_then(|h| h.as_str()?.parse().ok())
            .ok_or_else(|| Self::bad_params("transaction hash"))?;
        let Some(tx) = self.txs.get(&hash) else {
            return Ok(Value::Null);
        };
        let logs: Vec<Value> = self
            .logs
            .iter()
            .filter(|n| n.log.tx_hash == hash)
            .map(|n| self.log_json(n))
            .collect();
        Ok(json!({
            "transactionHash": hash.to_string(),
            "from": tx.from.to_string(),
            "to": tx.to.map(|a| a.to_string()),
            "contractAddress": tx.creates.map(|a| a.to_string()),
            "gasUsed": hex_quantity(tx.gas_used),
            "effectiveGasPrice": hex_quantity(tx.gas_price),
            "status": "0x1",
            "blockNumber": hex_quantity(tx.block),
            "transactionIndex": hex_quantity(tx.index),
            "logs": logs,
        }))
    }

    fn code_at(&self, addr: &Address, block: u64) -> Bytes {
        match self.code.get(addr) {
            Some((created, code)) if *created <= block => code.clone(),
            _ => Bytes::default(),
        }
    }

    fn get_code(&self, params: &Value) -> RpcResult {
        let addr: Address = params
            .get(0)
            .and_then(|a| a.as_str()?.parse().ok())
            .ok_or_else(|| Self::bad_params("address"))?;
        let block = self.block_param(params.get(1))?;
        Ok(json!(self.code_at(&addr, block).to_string()))
    }

    fn eth_call(&self, params: &Value) -> RpcResult {
        let call = params.get(0).ok_or_else(|| Self::bad_params("call object"))?;
        let to: Address = call
            .get("to")
            .and_then(|a| a.as_str()?.parse().ok())
            .ok_or_else(|| Self::bad_params("to"))?;
        let data: Bytes = call
            .get("data")
            .or_else(|| call.get("input"))
            .and_then(|d| d.as_str()?.parse().ok())
            .unwrap_or_default();
        let block = self.block_param(params.get(1))?;
        if self.code_at(&to, block).is_empty() {
            return Ok(json!("0x"));
        }
        let meta = self.metadata.get(&to).cloned().unwrap_or_default();
        let selector = data.get(..4).unwrap_or(&[]);
        let is = |s: &str| selector == keccak_selector(s).0;
        let ret: Option<Vec<u8>> = if is(sig::NAME) {
            meta.name.as_deref().map(encode_string_return)
        } else if is(sig::SYMBOL) {
            meta.symbol.as_deref().map(encode_string_return)
        } else if is(sig::DECIMALS) {
            meta.decimals.map(|d| crate::amount::Amount::from(d).to_word().unwrap().to_vec())
        } else if is(sig::TOTAL_SUPPLY) {
            meta.total_supply.and_then(|s| s.to_word().ok()).map(|w| w.to_vec())
        } else {
            None
        };
        match ret {
            Some(bytes) => Ok(json!(Bytes(bytes).to_string())),
            None => Err(Self::revert()),
        }
    }

    fn dispatch(&self, req: &RpcRequest) -> RpcResult {
        let r = match req.method.as_str() {
            "eth_getLogs" => self.get_logs(&req.params),
            "eth_getBlockByNumber" => self.get_block(&req.params),
            "eth_getTransactionReceipt" => self.get_receipt(&req.params),
            "eth_getCode" => self.get_code(&req.params),
            "eth_call" => self.eth_call(&req.params),
            "eth_blockNumber" => Ok(json!(hex_quantity(self.head))),
            other => Err(RpcError { code: -32601, message: format!("method {other} not found") }),
        };
        if r.is_ok() {
            self.count(&req.method);
        }
        r
    }

    /// Handles a raw JSON-RPC body (single request or batch).
    pub fn handle_json(&self, body: &Value) -> Value {
        let single = !body.is_array();
        let items: Vec<Value> = match body {
            Value::Array(a) => a.clone(),
            other => vec![other.clone()],
        };
        let replies: Vec<Value> = items
            .iter()
            .map(|item| {
                let id = item.get("id").cloned().unwrap_or(Value::Null);
                let req = RpcRequest {
                    method: item.get("method").and_then(Value::as_str).unwrap_or("").to_string(),
                    params: item.get("params").cloned().unwrap_or(json!([])),
                };
                match self.dispatch(&req) {
                    Ok(result) => json!({"jsonrpc": "2.0", "id": id, "result": result}),
                    Err(e) => json!({"jsonrpc": "2.0", "id": id, "error": {"code": e.code, "message": e.message}}),
                }
            })
            .collect();
        if single {
            replies.into_iter().next().unwrap_or(Value::Null)
        } else {
            Value::Array(replies)
        }
    }
}

impl Transport for MemNode {
    fn send(&self, batch: &[RpcRequest]) -> Result<Vec<RpcResult>, TransportError> {
        let pending = self.fail_next.load(Ordering::SeqCst);
        if pending > 0
            && self
                .fail_next
                .compare_exchange(pending, pending - 1, Ordering::SeqCst, Ordering::SeqCst)
                .is_ok()
        {
            return Err(TransportError::Io("injected connection reset".into()));
        }
        Ok(batch.iter().map(|r| self.dispatch(r)).collect())
    }
}
