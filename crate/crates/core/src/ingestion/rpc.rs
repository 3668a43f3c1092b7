//! Minimal EVM JSON-RPC client.
//!
//! Requests go through a [`Transport`] so the same client drives a real HTTP
//! node or the in-memory [`super::memnode::MemNode`]. Transport failures are
//! retried with exponential backoff; log queries the provider rejects for
//! spanning too many blocks are split and retried.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tracing::{debug, warn};

use crate::chain::{Address, BlockRef, Bytes, ContractCreation, Hash32, Topic};

#[derive(Clone, Debug, Serialize)]
pub struct RpcRequest {
    pub method: String,
    pub params: Value,
}

impl RpcRequest {
    pub fn new(method: &str, params: Value) -> Self {
        RpcRequest { method: method.to_string(), params }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("rpc error {code}: {message}")]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

impl RpcError {
    /// Heuristic for "query spans too many blocks" rejections.
    pub fn is_range_limit(&self) -> bool {
        let m = self.message.to_ascii_lowercase();
        self.code == -32005
            || m.contains("block range")
            || m.contains("range too")
            || m.contains("too many blocks")
    }

    /// Block-count limit stated in the message, e.g. "... max 1000 blocks".
    pub fn range_hint(&self) -> Option<u64> {
        let m = self.message.to_ascii_lowercase();
        if !m.contains("block") {
            return None;
        }
        m.split(|c: char| !c.is_ascii_digit())
            .filter(|s| !s.is_empty())
            .filter_map(|s| s.parse::<u64>().ok())
            .filter(|n| *n > 0)
            .next_back()
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("transport failure: {0}")]
    Io(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub type RpcResult = Result<Value, RpcError>;

pub trait Transport: Send + Sync {
    /// Sends a batch; the reply vector is aligned with the request order.
    fn send(&self, batch: &[RpcRequest]) -> Result<Vec<RpcResult>, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, batch: &[RpcRequest]) -> Result<Vec<RpcResult>, TransportError> {
        (**self).send(batch)
    }
}

/// JSON-RPC over HTTP(S).
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { url: url.to_string(), agent }
    }
}

/// Aligns a JSON-RPC reply (single object or batch array) with request ids `0..n`.
pub fn align_replies(reply: Value, n: usize) -> Result<Vec<RpcResult>, TransportError> {
    let items = match reply {
        Value::Array(a) => a,
        obj @ Value::Object(_) => vec![obj],
        other => return Err(TransportError::Malformed(format!("unexpected body {other}"))),
    };
    let mut out: Vec<Option<RpcResult>> = vec![None; n];
    for item in items {
        let id = item
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| TransportError::Malformed("reply without numeric id".into()))?
            as usize;
        let slot = out
            .get_mut(id)
            .ok_or_else(|| TransportError::Malformed(format!("reply id {id} out of range")))?;
        *slot = Some(match item.get("error") {
            Some(e) if !e.is_null() => Err(RpcError {
                code: e.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: e.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
            }),
            _ => Ok(item.get("result").cloned().unwrap_or(Value::Null)),
        });
    }
    out.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| TransportError::Malformed(format!("missing reply for id {i}"))))
        .collect()
}

pub fn encode_batch(batch: &[RpcRequest]) -> Value {
    let items: Vec<Value> = batch
        .iter()
        .enumerate()
        .map(|(i, r)| json!({"jsonrpc": "2.0", "id": i, "method": r.method, "params": r.params}))
        .collect();
    Value::Array(items)
}

impl Transport for HttpTransport {
    fn send(&self, batch: &[RpcRequest]) -> Result<Vec<RpcResult>, TransportError> {
        let body = encode_batch(batch);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send_json(&body)
            .map_err(|e| TransportError::Io(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Io(format!("http status {status}")));
        }
        let reply: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        align_replies(reply, batch.len())
    }
}

/// Inclusive block interval; empty when `from > to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockRange {
    pub from: u64,
    pub to: u64,
}

impl BlockRange {
    pub fn new(from: u64, to: u64) -> Self {
        BlockRange { from, to }
    }

    pub fn is_empty(&self) -> bool {
        self.from > self.to
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            self.to - self.from + 1
        }
    }

    /// Consecutive sub-ranges of at most `size` blocks.
    pub fn windows(&self, size: u64) -> Vec<BlockRange> {
        let size = size.max(1);
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let mut start = self.from;
        loop {
            let end = start.saturating_add(size - 1).min(self.to);
            out.push(BlockRange::new(start, end));
            if end == self.to {
                break;
            }
            start = end + 1;
        }
        out
    }

    pub fn halves(&self) -> (BlockRange, BlockRange) {
        let mid = self.from + (self.to - self.from) / 2;
        (BlockRange::new(self.from, mid), BlockRange::new(mid + 1, self.to))
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("fetch of blocks {from}..={to} failed: {source}")]
    Window {
        from: u64,
        to: u64,
        #[source]
        source: Box<FetchError>,
    },
    #[error("transport failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: TransportError },
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
}

fn malformed(what: &'static str, detail: impl ToString) -> FetchError {
    FetchError::Malformed { what, detail: detail.to_string() }
}

#[derive(Clone, Debug)]
pub struct RpcConfig {
    /// Blocks per log query window.
    pub window: u64,
    /// Requests per JSON-RPC batch.
    pub batch_size: usize,
    /// Retries after the first failed attempt.
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
    /// Concurrent windows.
    pub workers: usize,
}

impl Default for RpcConfig {
    fn default() -> Self {
        RpcConfig {
            window: 2_000,
            batch_size: 100,
            max_retries: 5,
            base_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
            workers: 4,
        }
    }
}

/// Raw `eth_getLogs` entry before transaction enrichment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawLog {
    pub address: Address,
    pub topics: Vec<Hash32>,
    pub data: Bytes,
    pub block_number: u64,
    pub tx_hash: Hash32,
    pub tx_index: u64,
    pub log_index: u64,
}

impl RawLog {
    pub fn topic0(&self) -> Option<Topic> {
        self.topics.first().map(|t| Topic(t.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceiptInfo {
    pub tx_hash: Hash32,
    pub from: Address,
    pub to: Option<Address>,
    pub contract_address: Option<Address>,
    pub gas_used: u64,
    pub gas_price: u64,
    pub success: bool,
    pub block_number: u64,
    pub tx_index: u64,
}

/// A creation transaction together with its position in the block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CreationHit {
    pub creation: ContractCreation,
    pub tx_index: u64,
}

#[derive(Debug, Default)]
pub struct RpcStats {
    /// Successful `eth_getLogs` calls.
    pub log_requests: AtomicUsize,
    pub retries: AtomicUsize,
    pub splits: AtomicUsize,
}

pub struct RpcClient<T> {
    transport: T,
    pub config: RpcConfig,
    pub stats: RpcStats,
}

pub fn quantity(v: &Value, what: &'static str) -> Result<u64, FetchError> {
    match v {
        Value::String(s) => {
            let h = s.strip_prefix("0x").ok_or_else(|| malformed(what, s))?;
            if h.is_empty() {
                return Ok(0);
            }
            u64::from_str_radix(h, 16).map_err(|_| malformed(what, s))
        }
        Value::Number(n) => n.as_u64().ok_or_else(|| malformed(what, n)),
        other => Err(malformed(what, other)),
    }
}

fn field<'a>(v: &'a Value, key: &str, what: &'static str) -> Result<&'a Value, FetchError> {
    v.get(key).ok_or_else(|| malformed(what, format!("missing {key}")))
}

fn parse_hex<T: std::str::FromStr>(v: &Value, what: &'static str) -> Result<T, FetchError> {
    v.as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(what, v))
}

pub fn hex_quantity(n: u64) -> String {
    format!("0x{n:x}")
}

impl<T: Transport> RpcClient<T> {
    pub fn new(transport: T, config: RpcConfig) -> Self {
        RpcClient { transport, config, stats: RpcStats::default() }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.config.base_backoff.saturating_mul(factor).min(self.config.max_backoff)
    }

    /// Sends one batch, retrying transport failures with exponential backoff.
    pub fn send(&self, batch: &[RpcRequest]) -> Result<Vec<RpcResult>, FetchError> {
        let mut attempt = 0u32;
        loop {
            match self.transport.send(batch) {
                Ok(r) => return Ok(r),
                Err(e) if attempt < self.config.max_retries => {
                    let wait = self.backoff(attempt);
                    debug!(attempt, ?wait, error = %e, "retrying rpc batch");
                    self.stats.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(FetchError::Transport { attempts: attempt + 1, last: e }),
            }
        }
    }

    pub fn call(&self, method: &str, params: Value) -> Result<Value, FetchError> {
        let mut r = self.send(&[RpcRequest::new(method, params)])?;
        Ok(r.pop().ok_or_else(|| malformed("reply", "empty batch reply"))??)
    }

    /// Sends many requests in `batch_size` chunks; per-request errors are kept.
    pub fn call_many(&self, requests: Vec<RpcRequest>) -> Result<Vec<RpcResult>, FetchError> {
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.config.batch_size.max(1)) {
            out.extend(self.send(chunk)?);
        }
        Ok(out)
    }

    fn with_pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }

    /// Every log in `range` whose topic0 is one of `topics`, in chain order.
    pub fn fetch_logs(&self, topics: &[Topic], range: BlockRange) -> Result<Vec<RawLog>, FetchError> {
        if range.is_empty() || topics.is_empty() {
            return Ok(Vec::new());
        }
        let windows = range.windows(self.config.window);
        let topic_filter: Vec<String> = topics.iter().map(|t| t.to_string()).collect();
        let per_window: Vec<Result<Vec<RawLog>, FetchError>> = self.with_pool(|| {
            windows
                .par_iter()
                .map(|w| {
                    self.fetch_window(&topic_filter, *w).map_err(|e| FetchError::Window {
                        from: w.from,
                        to: w.to,
                        source: Box::new(e),
                    })
                })
                .collect()
        });
        let mut logs = Vec::new();
        for r in per_window {
            logs.extend(r?);
        }
        logs.sort_by_key(|l| (l.block_number, l.log_index));
        Ok(logs)
    }

    fn fetch_window(&self, topics: &[String], w: BlockRange) -> Result<Vec<RawLog>, FetchError> {
        let params = json!([{
            "fromBlock": hex_quantity(w.from),
            "toBlock": hex_quantity(w.to),
            "topics": [topics],
        }]);
        match self.call("eth_getLogs", params) {
            Ok(v) => {
                self.stats.log_requests.fetch_add(1, Ordering::Relaxed);
                let arr = v.as_array().ok_or_else(|| malformed("eth_getLogs result", &v))?;
                arr.iter().map(parse_log).collect()
            }
            Err(FetchError::Rpc(e)) if e.is_range_limit() && w.len() > 1 => {
                self.stats.splits.fetch_add(1, Ordering::Relaxed);
                let parts = match e.range_hint() {
                    Some(limit) if limit < w.len() => w.windows(limit),
                    _ => {
                        let (a, b) = w.halves();
                        vec![a, b]
                    }
                };
                warn!(from = w.from, to = w.to, parts = parts.len(), "provider range limit, splitting");
                let mut out = Vec::new();
                for p in parts {
                    out.extend(self.fetch_window(topics, p)?);
                }
                Ok(out)
            }
            Err(e) => Err(e),
        }
    }

    pub fn get_code(&self, address: Address, block: u64) -> Result<Bytes, FetchError> {
        let v = self.call("eth_getCode", json!([address.to_string(), hex_quantity(block)]))?;
        parse_hex(&v, "eth_getCode result")
    }

    /// Receipts for the given transactions, keyed by hash.
    pub fn receipts(&self, hashes: &BTreeSet<Hash32>) -> Result<HashMap<Hash32, ReceiptInfo>, FetchError> {
        let reqs: Vec<RpcRequest> = hashes
            .iter()
            .map(|h| RpcRequest::new("eth_getTransactionReceipt", json!([h.to_string()])))
            .collect();
        let replies = self.call_many(reqs)?;
        let mut out = HashMap::with_capacity(replies.len());
        for r in replies {
            let v = r?;
            if v.is_null() {
                continue;
            }
            let info = parse_receipt(&v)?;
            out.insert(info.tx_hash, info);
        }
        Ok(out)
    }

    /// Block timestamps for the given block numbers.
    pub fn block_timestamps(&self, blocks: &BTreeSet<u64>) -> Result<HashMap<u64, u64>, FetchError> {
        let reqs: Vec<RpcRequest> = blocks
            .iter()
            .map(|b| RpcRequest::new("eth_getBlockByNumber", json!([hex_quantity(*b), false])))
            .collect();
        let replies = self.call_many(reqs)?;
        let mut out = HashMap::new();
        for (b, r) in blocks.iter().zip(replies) {
            let v = r?;
            if v.is_null() {
                continue;
            }
            if let Some(ts) = v.get("timestamp") {
                out.insert(*b, quantity(ts, "block timestamp")?);
            }
        }
        Ok(out)
    }

    /// Contracts deployed by creation transactions (empty recipient) in `range`.
    pub fn fetch_contract_creations(&self, range: BlockRange) -> Result<Vec<CreationHit>, FetchError> {
        let windows = range.windows(self.config.window.min(self.config.batch_size as u64).max(1));
        let per_window: Vec<Result<Vec<CreationHit>, FetchError>> = self.with_pool(|| {
            windows
                .par_iter()
                .map(|w| {
                    self.creations_in(*w).map_err(|e| FetchError::Window {
                        from: w.from,
                        to: w.to,
                        source: Box::new(e),
                    })
                })
                .collect()
        });
        let mut out = Vec::new();
        for r in per_window {
            out.extend(r?);
        }
        out.sort_by_key(|h| (h.creation.block.number, h.tx_index));
        Ok(out)
    }

    fn creations_in(&self, w: BlockRange) -> Result<Vec<CreationHit>, FetchError> {
        let reqs: Vec<RpcRequest> = (w.from..=w.to)
            .map(|b| RpcRequest::new("eth_getBlockByNumber", json!([hex_quantity(b), true])))
            .collect();
        let blocks = self.call_many(reqs)?;
        let mut candidates: BTreeSet<Hash32> = BTreeSet::new();
        let mut timestamps: HashMap<u64, u64> = HashMap::new();
        for r in blocks {
            let block = r?;
            if block.is_null() {
                continue;
            }
            let number = quantity(field(&block, "number", "block")?, "block number")?;
            if let Some(ts) = block.get("timestamp") {
                timestamps.insert(number, quantity(ts, "block timestamp")?);
            }
            let txs = field(&block, "transactions", "block")?
                .as_array()
                .ok_or_else(|| malformed("block transactions", number))?;
            for tx in txs {
                if tx.get("to").is_none_or(Value::is_null) {
                    candidates.insert(parse_hex(field(tx, "hash", "transaction")?, "transaction hash")?);
                }
            }
        }
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let receipts = self.receipts(&candidates)?;
        let mut deployed: Vec<ReceiptInfo> = receipts
            .into_values()
            .filter(|r| r.success && r.contract_address.is_some())
            .collect();
        deployed.sort_by_key(|r| (r.block_number, r.tx_index));
        let code_reqs: Vec<RpcRequest> = deployed
            .iter()
            .map(|r| {
                RpcRequest::new(
                    "eth_getCode",
                    json!([r.contract_address.unwrap().to_string(), hex_quantity(w.to)]),
                )
            })
            .collect();
        let codes = self.call_many(code_reqs)?;
        let mut out = Vec::new();
        for (r, code) in deployed.into_iter().zip(codes) {
            let code: Bytes = parse_hex(&code?, "eth_getCode result")?;
            if code.is_empty() {
                continue;
            }
            let block = match timestamps.get(&r.block_number) {
                Some(ts) => BlockRef::at(r.block_number, *ts),
                None => BlockRef::new(r.block_number),
            };
            out.push(CreationHit {
                creation: ContractCreation {
                    contract: r.contract_address.unwrap(),
                    deployer: r.from,
                    block,
                    index: r.tx_index,
                    tx_hash: r.tx_hash,
                    via_internal: false,
                    bytecode: code,
                    gas_used: r.gas_used,
                    gas_price: r.gas_price,
                    metadata: None,
                },
                tx_index: r.tx_index,
            });
        }
        Ok(out)
    }
}

fn parse_log(v: &Value) -> Result<RawLog, FetchError> {
    let topics = field(v, "topics", "log")?
        .as_array()
        .ok_or_else(|| malformed("log topics", v))?
        .iter()
        .map(|t| parse_hex(t, "log topic"))
        .collect::<Result<Vec<Hash32>, _>>()?;
    Ok(RawLog {
        address: parse_hex(field(v, "address", "log")?, "log address")?,
        topics,
        data: parse_hex(field(v, "data", "log")?, "log data")?,
        block_number: quantity(field(v, "blockNumber", "log")?, "log blockNumber")?,
        tx_hash: parse_hex(field(v, "transactionHash", "log")?, "log transactionHash")?,
        tx_index: quantity(field(v, "transactionIndex", "log")?, "log transactionIndex")?,
        log_index: quantity(field(v, "logIndex", "log")?, "log logIndex")?,
    })
}

fn parse_receipt(v: &Value) -> Result<ReceiptInfo, FetchError> {
    let opt_addr = |key: &str| -> Result<Option<Address>, FetchError> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(a) => parse_hex(a, "receipt address").map(Some),
        }
    };
    let gas_price = match v.get("effectiveGasPrice") {
        Some(p) if !p.is_null() => quantity(p, "receipt effectiveGasPrice")?,
        _ => 0,
    };
    Ok(ReceiptInfo {
        tx_hash: parse_hex(field(v, "transactionHash", "receipt")?, "receipt hash")?,
        from: parse_hex(field(v, "from", "receipt")?, "receipt from")?,
        to: opt_addr("to")?,
        contract_address: opt_addr("contractAddress")?,
        gas_used: quantity(field(v, "gasUsed", "receipt")?, "receipt gasUsed")?,
        gas_price,
        success: v.get("status").map_or(Ok(1), |s| quantity(s, "receipt status"))? == 1,
        block_number: quantity(field(v, "blockNumber", "receipt")?, "receipt blockNumber")?,
        tx_index: quantity(field(v, "transactionIndex", "receipt")?, "receipt transactionIndex")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_range_exactly() {
        let r = BlockRange::new(0, 9_999);
        let w = r.windows(1_000);
        assert_eq!(w.len(), 10);
        assert_eq!(w[0], BlockRange::new(0, 999));
        assert_eq!(w[9], BlockRange::new(9_000, 9_999));
        assert!(BlockRange::new(5, 4).windows(10).is_empty());
        assert_eq!(BlockRange::new(7, 7).windows(10), vec![BlockRange::new(7, 7)]);
        let (a, b) = BlockRange::new(0, 9).halves();
        assert_eq!((a.len(), b.len()), (5, 5));
    }

    #[test]
    fn range_limit_detection() {
        let e = RpcError { code: -32602, message: "block range is too wide; max 1000 blocks".into() };
        assert!(e.is_range_limit());
        assert_eq!(e.range_hint(), Some(1000));
        let other = RpcError { code: -32000, message: "execution reverted".into() };
        assert!(!other.is_range_limit());
        let results = RpcError { code: -32005, message: "query returned more than 10000 results".into() };
        assert!(results.is_range_limit());
        assert_eq!(results.range_hint(), None);
    }

    #[test]
    fn aligns_out_of_order_batch_replies() {
        let reply = json!([
            {"jsonrpc":"2.0","id":1,"result":"0x2"},
            {"jsonrpc":"2.0","id":0,"error":{"code":3,"message":"execution reverted"}}
        ]);
        let r = align_replies(reply, 2).unwrap();
        assert_eq!(r[1], Ok(json!("0x2")));
        assert_eq!(r[0].as_ref().unwrap_err().code, 3);
        assert!(align_replies(json!([{"id":0,"result":1}]), 2).is_err());
    }

    #[test]
    fn quantities() {
        assert_eq!(quantity(&json!("0x1a"), "q").unwrap(), 26);
        assert_eq!(quantity(&json!("0x"), "q").unwrap(), 0);
        assert!(quantity(&json!("1a"), "q").is_err());
    }
}
