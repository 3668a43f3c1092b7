//! Token identification from runtime bytecode.
//!
//! A contract is a token when its bytecode carries every mandatory selector
//! of a standard interface. Selectors are read from the operands of `PUSH4`
//! instructions in the decoded opcode stream. When the stream cannot be
//! decoded (a push operand runs past the end of the code) the scan falls back
//! to treating every 4-byte window as a candidate.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{
    keccak_selector, signatures as sig, Address, BlockRef, ContractCreation, EventTopics,
    LogRecord, Selector, TokenMetadata, Topic,
};
use crate::tables::{fmt_opt, Table};

const PUSH1: u8 = 0x60;
const PUSH4: u8 = 0x63;
const PUSH32: u8 = 0x7f;

/// Interface definition used for compliance checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StandardSpec {
    pub name: String,
    pub mandatory_selectors: BTreeSet<Selector>,
    pub optional_selectors: BTreeSet<Selector>,
    pub transfer_topic: Topic,
}

fn selectors(list: &[&str]) -> BTreeSet<Selector> {
    list.iter().map(|s| keccak_selector(s)).collect()
}

impl StandardSpec {
    /// ERC-20: `name()`, `symbol()` and `decimals()` are optional.
    pub fn erc20() -> Self {
        StandardSpec {
            name: "ERC-20".into(),
            mandatory_selectors: selectors(&[
                sig::TOTAL_SUPPLY,
                sig::BALANCE_OF,
                sig::TRANSFER,
                sig::TRANSFER_FROM,
                sig::APPROVE,
                sig::ALLOWANCE,
            ]),
            optional_selectors: selectors(&[sig::NAME, sig::SYMBOL, sig::DECIMALS]),
            transfer_topic: EventTopics::get().transfer,
        }
    }

    /// BEP-20: only `symbol()` is optional.
    pub fn bep20() -> Self {
        StandardSpec {
            name: "BEP-20".into(),
            mandatory_selectors: selectors(&[
                sig::NAME,
                sig::DECIMALS,
                sig::TOTAL_SUPPLY,
                sig::BALANCE_OF,
                sig::TRANSFER,
                sig::TRANSFER_FROM,
                sig::APPROVE,
                sig::ALLOWANCE,
            ]),
            optional_selectors: selectors(&[sig::SYMBOL]),
            transfer_topic: EventTopics::get().transfer,
        }
    }

    /// The standard appropriate for a chain profile name.
    pub fn for_chain(chain: &str) -> Self {
        if chain.eq_ignore_ascii_case("bsc") {
            Self::bep20()
        } else {
            Self::erc20()
        }
    }

    pub fn all_selectors(&self) -> BTreeSet<Selector> {
        self.mandatory_selectors
            .union(&self.optional_selectors)
            .copied()
            .collect()
    }
}

/// Strips a trailing CBOR metadata section (the last two bytes give its length).
fn strip_metadata(code: &[u8]) -> &[u8] {
    if code.len() < 2 {
        return code;
    }
    let len = u16::from_be_bytes([code[code.len() - 2], code[code.len() - 1]]) as usize;
    if len == 0 || len + 2 > code.len() {
        return code;
    }
    let start = code.len() - 2 - len;
    // CBOR maps with one to three entries
    if matches!(code[start], 0xa1..=0xa3) {
        &code[..start]
    } else {
        code
    }
}

/// Operands of every `PUSH4`, or `None` when a push operand is truncated.
fn push4_operands(code: &[u8]) -> Option<BTreeSet<Selector>> {
    let mut out = BTreeSet::new();
    let mut pc = 0usize;
    while pc < code.len() {
        let op = code[pc];
        if (PUSH1..=PUSH32).contains(&op) {
            let n = (op - PUSH1 + 1) as usize;
            let operand = code.get(pc + 1..pc + 1 + n)?;
            if op == PUSH4 {
                out.insert(Selector([operand[0], operand[1], operand[2], operand[3]]));
            }
            pc += 1 + n;
        } else {
            pc += 1;
        }
    }
    Some(out)
}

/// Every selector the bytecode exposes under the dispatch-scan rule.
pub fn extract_selectors(bytecode: &[u8]) -> BTreeSet<Selector> {
    let code = strip_metadata(bytecode);
    match push4_operands(code) {
        Some(set) => set,
        None => bytecode
            .windows(4)
            .map(|w| Selector([w[0], w[1], w[2], w[3]]))
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Compliance {
    pub compliant: bool,
    pub has_all_optional: bool,
}

pub fn is_compliant(bytecode: &[u8], spec: &StandardSpec) -> Compliance {
    let found = extract_selectors(bytecode);
    Compliance {
        compliant: spec.mandatory_selectors.is_subset(&found),
        has_all_optional: spec.optional_selectors.is_subset(&found),
    }
}

/// Assembles a minimal Solidity-style dispatcher exposing `selectors`.
///
/// Layout: free-memory-pointer setup, calldata-size guard, selector load,
/// then one `DUP1 PUSH4 <sel> EQ PUSH2 <dest> JUMPI` per entry followed by
/// the revert fallback and one `JUMPDEST STOP` body per selector.
pub fn assemble_dispatcher(selectors: &[Selector]) -> Vec<u8> {
    const HEADER_LEN: usize = 19;
    const BRANCH_LEN: usize = 11;
    const FALLBACK_LEN: usize = 5;
    let fallback_at = HEADER_LEN + BRANCH_LEN * selectors.len();
    let mut code = Vec::with_capacity(fallback_at + FALLBACK_LEN + 2 * selectors.len());
    code.extend_from_slice(&[0x60, 0x80, 0x60, 0x40, 0x52]);
    // calldatasize < 4 -> fallback
    code.extend_from_slice(&[0x60, 0x04, 0x36, 0x10, 0x61]);
    code.extend_from_slice(&(fallback_at as u16).to_be_bytes());
    code.push(0x57);
    code.extend_from_slice(&[0x60, 0x00, 0x35, 0x60, 0xe0, 0x1c]);
    for (i, s) in selectors.iter().enumerate() {
        let dest = (fallback_at + FALLBACK_LEN + 2 * i) as u16;
        code.extend_from_slice(&[0x80, PUSH4]);
        code.extend_from_slice(&s.0);
        code.extend_from_slice(&[0x14, 0x61]);
        code.extend_from_slice(&dest.to_be_bytes());
        code.push(0x57);
    }
    code.extend_from_slice(&[0x5b, 0x60, 0x00, 0x80, 0xfd]);
    for _ in selectors {
        code.extend_from_slice(&[0x5b, 0x00]);
    }
    code
}

/// An identified token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenRecord {
    pub address: Address,
    pub creation: ContractCreation,
    pub standard: String,
    pub implements_optional: bool,
    pub metadata: TokenMetadata,
    pub first_block: BlockRef,
    pub last_event_block: BlockRef,
    pub is_lp_token: bool,
}

impl TokenRecord {
    pub fn deployer(&self) -> Address {
        self.creation.deployer
    }
}

#[derive(Clone, Debug, Default)]
pub struct TokenDataset {
    /// Compliant contracts in address order, LP tokens included and flagged.
    pub tokens: Vec<TokenRecord>,
    /// Contract addresses that appeared in more than one creation record.
    pub duplicates: Vec<Address>,
    pub non_compliant: usize,
}

impl TokenDataset {
    pub fn standard_tokens(&self) -> impl Iterator<Item = &TokenRecord> {
        self.tokens.iter().filter(|t| !t.is_lp_token)
    }

    pub fn lp_tokens(&self) -> impl Iterator<Item = &TokenRecord> {
        self.tokens.iter().filter(|t| t.is_lp_token)
    }

    pub fn standard_count(&self) -> usize {
        self.standard_tokens().count()
    }

    pub fn lp_count(&self) -> usize {
        self.lp_tokens().count()
    }

    pub fn by_address(&self) -> HashMap<Address, &TokenRecord> {
        self.tokens.iter().map(|t| (t.address, t)).collect()
    }
}

/// Latest block in which each address emitted a log.
pub fn last_log_blocks<'a>(logs: impl IntoIterator<Item = &'a LogRecord>) -> HashMap<Address, BlockRef> {
    let mut last: HashMap<Address, BlockRef> = HashMap::new();
    for log in logs {
        last.entry(log.emitter)
            .and_modify(|b| {
                if log.block.number > b.number {
                    *b = log.block;
                }
            })
            .or_insert(log.block);
    }
    last
}

pub fn build_token_dataset(
    creations: &[ContractCreation],
    logs: &[LogRecord],
    spec: &StandardSpec,
    pool_addresses: &HashSet<Address>,
) -> TokenDataset {
    let mut first: BTreeMap<Address, &ContractCreation> = BTreeMap::new();
    let mut duplicates = BTreeSet::new();
    for c in creations {
        if let std::collections::btree_map::Entry::Vacant(e) = first.entry(c.contract) {
            e.insert(c);
        } else {
            duplicates.insert(c.contract);
        }
    }
    let last = last_log_blocks(logs);
    let unique: Vec<&ContractCreation> = first.into_values().collect();
    let checked: Vec<(Compliance, &ContractCreation)> = unique
        .par_iter()
        .map(|c| (is_compliant(&c.bytecode, spec), *c))
        .collect();
    let non_compliant = checked.iter().filter(|(k, _)| !k.compliant).count();
    let tokens = checked
        .into_iter()
        .filter(|(k, _)| k.compliant)
        .map(|(k, c)| {
            let last_event_block = match last.get(&c.contract) {
                Some(b) if b.number > c.block.number => *b,
                _ => c.block,
            };
            TokenRecord {
                address: c.contract,
                standard: spec.name.clone(),
                implements_optional: k.has_all_optional,
                metadata: c.metadata.clone().unwrap_or_default(),
                first_block: c.block,
                last_event_block,
                is_lp_token: pool_addresses.contains(&c.contract),
                creation: c.clone(),
            }
        })
        .collect();
    TokenDataset {
        tokens,
        duplicates: duplicates.into_iter().collect(),
        non_compliant,
    }
}

pub fn tokens_table(ds: &TokenDataset) -> Table {
    let mut t = Table::new(&[
        "address", "deployer", "standard", "is_lp_token", "implements_optional", "via_internal", "name", "symbol",
        "decimals", "total_supply", "created_block", "created_timestamp", "last_event_block", "tx_hash",
    ]);
    for r in &ds.tokens {
        t.push(vec![
            r.address.to_string(),
            r.deployer().to_string(),
            r.standard.clone(),
            r.is_lp_token.to_string(),
            r.implements_optional.to_string(),
            r.creation.via_internal.to_string(),
            r.metadata.name.clone().unwrap_or_default(),
            r.metadata.symbol.clone().unwrap_or_default(),
            fmt_opt(&r.metadata.decimals),
            fmt_opt(&r.metadata.total_supply),
            r.first_block.number.to_string(),
            fmt_opt(&r.first_block.timestamp),
            r.last_event_block.number.to_string(),
            r.creation.tx_hash.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Bytes, Hash32};

    fn sel(s: &str) -> Selector {
        keccak_selector(s)
    }

    fn creation(addr: Address, code: Vec<u8>, block: u64) -> ContractCreation {
        ContractCreation {
            contract: addr,
            deployer: Address::derive("deployer"),
            block: BlockRef::new(block),
            index: 0,
            tx_hash: Hash32::default(),
            via_internal: false,
            bytecode: Bytes(code),
            gas_used: 1,
            gas_price: 1,
            metadata: None,
        }
    }

    #[test]
    fn single_push_literal() {
        let code = vec![0x63, 0xa9, 0x05, 0x9c, 0xbb];
        let found = extract_selectors(&code);
        assert_eq!(found, [Selector([0xa9, 0x05, 0x9c, 0xbb])].into_iter().collect());
    }

    #[test]
    fn empty_dispatch_has_no_selectors() {
        assert!(extract_selectors(&assemble_dispatcher(&[])).is_empty());
        assert!(extract_selectors(&[0x00]).is_empty());
    }

    #[test]
    fn push_operands_are_not_opcodes() {
        // PUSH5 whose operand contains 0x63 followed by four bytes
        let code = vec![0x64, 0x63, 0x01, 0x02, 0x03, 0x04, 0x00];
        assert!(extract_selectors(&code).is_empty());
    }

    #[test]
    fn truncated_push_falls_back_to_windows() {
        let mut code = vec![0x00, 0xa9, 0x05, 0x9c, 0xbb];
        code.push(0x7f); // PUSH32 with no operand
        let found = extract_selectors(&code);
        assert!(found.contains(&Selector([0xa9, 0x05, 0x9c, 0xbb])));
    }

    #[test]
    fn metadata_trailer_is_ignored() {
        let mut code = assemble_dispatcher(&[sel("transfer(address,uint256)")]);
        code.push(0xfe);
        // a2 64 'ipfs' 58 22 <34 bytes> ... with a truncated-looking push inside
        let mut meta = vec![0xa2, 0x64, b'i', b'p', b'f', b's', 0x58, 0x22];
        meta.extend(std::iter::repeat(0x7f).take(34));
        meta.extend_from_slice(&[0x64, b's', b'o', b'l', b'c', 0x43, 0, 8, 4]);
        let len = meta.len() as u16;
        code.extend_from_slice(&meta);
        code.extend_from_slice(&len.to_be_bytes());
        let found = extract_selectors(&code);
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn dispatcher_jump_targets_are_jumpdests() {
        let sels: Vec<Selector> = StandardSpec::erc20().all_selectors().into_iter().collect();
        let code = assemble_dispatcher(&sels);
        let mut pc = 0;
        let mut targets = vec![];
        while pc < code.len() {
            let op = code[pc];
            if op == 0x61 {
                targets.push(((code[pc + 1] as usize) << 8) | code[pc + 2] as usize);
            }
            pc += if (PUSH1..=PUSH32).contains(&op) { 1 + (op - PUSH1 + 1) as usize } else { 1 };
        }
        assert_eq!(targets.len(), sels.len() + 1);
        for t in targets {
            assert_eq!(code[t], 0x5b, "target {t} is not a JUMPDEST");
        }
    }

    #[test]
    fn bep20_marks_only_symbol_optional() {
        let bep = StandardSpec::bep20();
        assert_eq!(bep.optional_selectors, [sel("symbol()")].into_iter().collect());
        assert_eq!(bep.mandatory_selectors.len(), 8);
        let erc = StandardSpec::erc20();
        assert_eq!(erc.mandatory_selectors.len(), 6);
        assert!(erc.mandatory_selectors.is_disjoint(&erc.optional_selectors));
        assert!(bep.mandatory_selectors.is_disjoint(&bep.optional_selectors));
    }

    #[test]
    fn missing_balance_of_is_not_compliant() {
        let spec = StandardSpec::erc20();
        let sels: Vec<Selector> = spec
            .all_selectors()
            .into_iter()
            .filter(|s| s.to_hex() != "70a08231")
            .collect();
        let c = is_compliant(&assemble_dispatcher(&sels), &spec);
        assert!(!c.compliant);
        let full: Vec<Selector> = spec.all_selectors().into_iter().collect();
        assert_eq!(
            is_compliant(&assemble_dispatcher(&full), &spec),
            Compliance { compliant: true, has_all_optional: true }
        );
    }

    #[test]
    fn dataset_counts_and_lp_exclusion() {
        let spec = StandardSpec::erc20();
        let full: Vec<Selector> = spec.all_selectors().into_iter().collect();
        let good = assemble_dispatcher(&full);
        let bad = assemble_dispatcher(&full[..3]);
        let mut creations = vec![];
        for i in 0..10 {
            let code = if i < 4 { good.clone() } else { bad.clone() };
            creations.push(creation(Address::derive(&format!("c{i}")), code, 10 + i));
        }
        let pools: HashSet<Address> = [Address::derive("c2")].into_iter().collect();
        let ds = build_token_dataset(&creations, &[], &spec, &pools);
        assert_eq!(ds.tokens.len(), 4);
        assert_eq!(ds.standard_count(), 3);
        assert_eq!(ds.lp_count(), 1);
        assert_eq!(ds.non_compliant, 6);
        for t in &ds.tokens {
            assert_eq!(t.last_event_block, t.first_block);
        }
    }

    #[test]
    fn duplicates_keep_first() {
        let spec = StandardSpec::erc20();
        let full: Vec<Selector> = spec.all_selectors().into_iter().collect();
        let a = Address::derive("dup");
        let creations = vec![
            creation(a, assemble_dispatcher(&full), 5),
            creation(a, assemble_dispatcher(&full), 9),
        ];
        let ds = build_token_dataset(&creations, &[], &spec, &HashSet::new());
        assert_eq!(ds.tokens.len(), 1);
        assert_eq!(ds.tokens[0].first_block.number, 5);
        assert_eq!(ds.duplicates, vec![a]);
    }

    #[test]
    fn empty_inputs() {
        let ds = build_token_dataset(&[], &[], &StandardSpec::erc20(), &HashSet::new());
        assert!(ds.tokens.is_empty());
    }
}
