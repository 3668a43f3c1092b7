//! Core chain vocabulary: addresses, hashes, selectors, decoded logs and
//! contract creations, plus Keccak-256 helpers for selectors and topics.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};
use thiserror::Error;

use crate::amount::Amount;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexError {
    #[error("missing 0x prefix in {0:?}")]
    MissingPrefix(String),
    #[error("invalid hex in {0:?}")]
    Invalid(String),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
}

fn decode_prefixed(s: &str) -> Result<Vec<u8>, HexError> {
    let body = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| HexError::MissingPrefix(s.to_string()))?;
    hex::decode(body).map_err(|_| HexError::Invalid(s.to_string()))
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_slice(bytes: &[u8]) -> Result<Self, HexError> {
                let arr: [u8; $len] = bytes
                    .try_into()
                    .map_err(|_| HexError::Length { expected: $len, got: bytes.len() })?;
                Ok($name(arr))
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|b| *b == 0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(0x{})", stringify!($name), hex::encode(self.0))
            }
        }

        impl FromStr for $name {
            type Err = HexError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::from_slice(&decode_prefixed(s.trim())?)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte account identifier, rendered as lowercase `0x` hex.
    Address, 20
);
fixed_bytes!(
    /// Generic 32-byte value: transaction hashes and indexed log topics.
    Hash32, 32
);
fixed_bytes!(
    /// 32-byte event identifier (topic0).
    Topic, 32
);
fixed_bytes!(
    /// 4-byte function selector.
    Selector, 4
);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    /// Deterministic address derived from a label, used by the simulator.
    pub fn derive(label: &str) -> Address {
        let h = keccak256(label.as_bytes());
        let mut out = [0u8; 20];
        out.copy_from_slice(&h[12..]);
        Address(out)
    }

    /// ABI word encoding (left-padded).
    pub fn to_word(&self) -> Hash32 {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&self.0);
        Hash32(w)
    }

    /// Reads an address from an ABI word; the 12 leading bytes must be zero.
    pub fn from_word(word: &[u8]) -> Option<Address> {
        if word.len() != 32 || word[..12].iter().any(|b| *b != 0) {
            return None;
        }
        Address::from_slice(&word[12..]).ok()
    }
}

impl Topic {
    /// First four bytes, for comparison with 4-byte signature tables.
    pub fn prefix(&self) -> Selector {
        Selector([self.0[0], self.0[1], self.0[2], self.0[3]])
    }
}

impl Selector {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// Arbitrary byte payload rendered as `0x`-prefixed lowercase hex.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bytes(pub Vec<u8>);

impl Bytes {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Bytes {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Bytes {
    fn from(v: Vec<u8>) -> Self {
        Bytes(v)
    }
}

impl fmt::Display for Bytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl fmt::Debug for Bytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bytes(0x{})", hex::encode(&self.0))
    }
}

impl FromStr for Bytes {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_prefixed(s.trim()).map(Bytes)
    }
}

impl Serialize for Bytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut hasher = Keccak256::new();
    hasher.update(data);
    hasher.finalize().into()
}

/// First four bytes of Keccak-256 over a canonical method signature.
pub fn keccak_selector(signature: &str) -> Selector {
    let h = keccak256(signature.as_bytes());
    Selector([h[0], h[1], h[2], h[3]])
}

/// Full Keccak-256 digest of a canonical event signature.
pub fn keccak_topic(signature: &str) -> Topic {
    Topic(keccak256(signature.as_bytes()))
}

/// Transaction fee in wei.
pub fn tx_fee(gas_used: u64, gas_price: u64) -> Amount {
    Amount::from(gas_used as u128 * gas_price as u128)
}

/// Block number with an optional timestamp (seconds since epoch).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub number: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl BlockRef {
    pub fn new(number: u64) -> Self {
        BlockRef { number, timestamp: None }
    }

    pub fn at(number: u64, timestamp: u64) -> Self {
        BlockRef { number, timestamp: Some(timestamp) }
    }
}

impl PartialOrd for BlockRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BlockRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.number, self.timestamp).cmp(&(other.number, other.timestamp))
    }
}

/// One decoded chain event together with its transaction context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub emitter: Address,
    pub block: BlockRef,
    /// Position within the block, assigned by the producer.
    pub index: u64,
    pub tx_hash: Hash32,
    pub tx_sender: Address,
    pub topic0: Topic,
    #[serde(default)]
    pub indexed_topics: Vec<Hash32>,
    #[serde(default)]
    pub data: Bytes,
    pub gas_used: u64,
    pub gas_price: u64,
}

impl LogRecord {
    pub fn order_key(&self) -> (u64, u64) {
        (self.block.number, self.index)
    }

    pub fn fee(&self) -> Amount {
        tx_fee(self.gas_used, self.gas_price)
    }

    /// 32-byte data word at `i`, if present.
    pub fn data_word(&self, i: usize) -> Option<&[u8]> {
        self.data.0.get(i * 32..(i + 1) * 32)
    }
}

/// Token metadata as returned by the optional ERC-20 view methods.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_supply: Option<Amount>,
}

/// A deployed contract and how it came to exist.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractCreation {
    pub contract: Address,
    /// The EOA that originated the deploying transaction.
    pub deployer: Address,
    pub block: BlockRef,
    pub index: u64,
    pub tx_hash: Hash32,
    /// True when the contract was created by another contract.
    pub via_internal: bool,
    pub bytecode: Bytes,
    pub gas_used: u64,
    pub gas_price: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<TokenMetadata>,
}

impl ContractCreation {
    pub fn order_key(&self) -> (u64, u64) {
        (self.block.number, self.index)
    }

    pub fn fee(&self) -> Amount {
        tx_fee(self.gas_used, self.gas_price)
    }
}

/// Canonical signatures used across the crate.
pub mod signatures {
    pub const TRANSFER_EVENT: &str = "Transfer(address,address,uint256)";
    pub const APPROVAL_EVENT: &str = "Approval(address,address,uint256)";
    pub const PAIR_CREATED_EVENT: &str = "PairCreated(address,address,address,uint256)";
    pub const MINT_EVENT: &str = "Mint(address,uint256,uint256)";
    pub const BURN_EVENT: &str = "Burn(address,uint256,uint256,address)";
    pub const SWAP_EVENT: &str = "Swap(address,uint256,uint256,uint256,uint256,address)";

    pub const NAME: &str = "name()";
    pub const SYMBOL: &str = "symbol()";
    pub const DECIMALS: &str = "decimals()";
    pub const TOTAL_SUPPLY: &str = "totalSupply()";
    pub const BALANCE_OF: &str = "balanceOf(address)";
    pub const TRANSFER: &str = "transfer(address,uint256)";
    pub const TRANSFER_FROM: &str = "transferFrom(address,address,uint256)";
    pub const APPROVE: &str = "approve(address,uint256)";
    pub const ALLOWANCE: &str = "allowance(address,address)";
}

/// Precomputed topic0 values for the events the toolkit decodes.
#[derive(Clone, Debug)]
pub struct EventTopics {
    pub transfer: Topic,
    pub approval: Topic,
    pub pair_created: Topic,
    pub mint: Topic,
    pub burn: Topic,
    pub swap: Topic,
}

impl EventTopics {
    pub fn get() -> &'static EventTopics {
        static TOPICS: std::sync::OnceLock<EventTopics> = std::sync::OnceLock::new();
        TOPICS.get_or_init(|| EventTopics {
            transfer: keccak_topic(signatures::TRANSFER_EVENT),
            approval: keccak_topic(signatures::APPROVAL_EVENT),
            pair_created: keccak_topic(signatures::PAIR_CREATED_EVENT),
            mint: keccak_topic(signatures::MINT_EVENT),
            burn: keccak_topic(signatures::BURN_EVENT),
            swap: keccak_topic(signatures::SWAP_EVENT),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_examples() {
        assert_eq!(keccak_selector("transfer(address,uint256)").to_hex(), "a9059cbb");
        assert_eq!(keccak_selector("totalSupply()").to_hex(), "18160ddd");
        assert_eq!(keccak_selector("").to_hex(), "c5d24601");
    }

    #[test]
    fn topic_examples() {
        let t = keccak_topic("Transfer(address,address,uint256)");
        assert_eq!(t.prefix().to_hex(), "ddf252ad");
        assert_eq!(t, keccak_topic("Transfer(address,address,uint256)"));
        assert_eq!(
            keccak_topic("Approval(address,address,uint256)").to_string(),
            "0x8c5be1e5ebec7d5bd14f71427d1e84f3dd0314c0f7b2291e5b200ac8c7c3b925"
        );
    }

    #[test]
    fn fees() {
        assert_eq!(tx_fee(0, 123), Amount::zero());
        assert_eq!(tx_fee(21_000, 5_000_000_000), Amount::from(105_000_000_000_000u64));
        assert_eq!(tx_fee(100_000, 0), Amount::zero());
        assert_eq!(tx_fee(u64::MAX, u64::MAX), Amount::from(u64::MAX as u128 * u64::MAX as u128));
    }

    #[test]
    fn address_rendering_and_parsing() {
        let a: Address = "0xE8b6f08841d668605343A63144D76ff2dE9A1199".parse().unwrap();
        assert_eq!(a.to_string(), "0xe8b6f08841d668605343a63144d76ff2de9a1199");
        assert_eq!(a.to_string().len(), 42);
        assert!(matches!("e8b6".parse::<Address>(), Err(HexError::MissingPrefix(_))));
        assert!(matches!("0x1234".parse::<Address>(), Err(HexError::Length { expected: 20, got: 2 })));
        assert_eq!(Address::from_word(&a.to_word().0), Some(a));
        let mut dirty = a.to_word().0;
        dirty[0] = 1;
        assert_eq!(Address::from_word(&dirty), None);
    }

    #[test]
    fn block_ordering_is_total() {
        let mut v = vec![BlockRef::new(3), BlockRef::at(1, 10), BlockRef::new(1)];
        v.sort();
        assert_eq!(v, vec![BlockRef::new(1), BlockRef::at(1, 10), BlockRef::new(3)]);
    }
}
