use serde_json::{json, Value};

use super::rpc::{FetchError, RpcClient, RpcRequest, Transport};
use crate::amount::Amount;
use crate::chain::{keccak_selector, signatures as sig, Address, Bytes, TokenMetadata};

/// Outcome of one optional view call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Field<T> {
    Value(T),
    /// Reverted, missing or empty return.
    Absent,
    /// Returned data that does not decode as the expected type.
    Undecodable,
}

impl<T> Field<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Field::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetadataProbe {
    pub token: Address,
    /// False when the address holds no code.
    pub is_contract: bool,
    pub name: Field<String>,
    pub symbol: Field<String>,
    pub decimals: Field<u8>,
    pub total_supply: Field<Amount>,
}

impl MetadataProbe {
    pub fn to_metadata(&self) -> TokenMetadata {
        TokenMetadata {
            name: self.name.clone().value(),
            symbol: self.symbol.clone().value(),
            decimals: self.decimals.clone().value(),
            total_supply: self.total_supply.clone().value(),
        }
    }
}

/// Decodes an ABI `string` return, also accepting legacy `bytes32` names.
pub fn decode_string_return(ret: &[u8]) -> Field<String> {
    if ret.is_empty() {
        return Field::Absent;
    }
    if ret.len() == 32 {
        let end = ret.iter().position(|b| *b == 0).unwrap_or(32);
        return match std::str::from_utf8(&ret[..end]) {
            Ok(s) => Field::Value(s.to_string()),
            Err(_) => Field::Undecodable,
        };
    }
    let word = |at: usize| -> Option<usize> {
        let w = ret.get(at..at + 32)?;
        if w[..24].iter().any(|b| *b != 0) {
            return None;
        }
        Some(u64::from_be_bytes(w[24..].try_into().ok()?) as usize)
    };
    let decoded = (|| {
        let offset = word(0)?;
        let len = word(offset)?;
        let start = offset.checked_add(32)?;
        let bytes = ret.get(start..start.checked_add(len)?)?;
        std::str::from_utf8(bytes).ok().map(str::to_string)
    })();
    match decoded {
        Some(s) => Field::Value(s),
        None => Field::Undecodable,
    }
}

pub fn decode_uint_return(ret: &[u8]) -> Field<Amount> {
    match ret.len() {
        0 => Field::Absent,
        n if n < 32 => Field::Undecodable,
        _ => Field::Value(Amount::from_word(&ret[..32])),
    }
}

fn decode_decimals(ret: &[u8]) -> Field<u8> {
    match decode_uint_return(ret) {
        Field::Value(v) => match u8::try_from(v.as_big()) {
            Ok(d) => Field::Value(d),
            Err(_) => Field::Undecodable,
        },
        Field::Absent => Field::Absent,
        Field::Undecodable => Field::Undecodable,
    }
}

impl<T: Transport> RpcClient<T> {
    /// Calls `name()`, `symbol()`, `decimals()` and `totalSupply()`.
    ///
    /// Reverting or missing methods yield [`Field::Absent`]; only transport
    /// failures are errors.
    pub fn call_token_metadata(&self, token: Address) -> Result<MetadataProbe, FetchError> {
        let code = self.call("eth_getCode", json!([token.to_string(), "latest"]))?;
        let has_code = code.as_str().is_some_and(|s| s.len() > 2);
        if !has_code {
            return Ok(MetadataProbe {
                token,
                is_contract: false,
                name: Field::Absent,
                symbol: Field::Absent,
                decimals: Field::Absent,
                total_supply: Field::Absent,
            });
        }
        let reqs: Vec<RpcRequest> = [sig::NAME, sig::SYMBOL, sig::DECIMALS, sig::TOTAL_SUPPLY]
            .iter()
            .map(|s| {
                let data = Bytes(keccak_selector(s).0.to_vec());
                RpcRequest::new(
                    "eth_call",
                    json!([{"to": token.to_string(), "data": data.to_string()}, "latest"]),
                )
            })
            .collect();
        let replies = self.send(&reqs)?;
        let raw: Vec<Option<Vec<u8>>> = replies
            .into_iter()
            .map(|r| match r {
                Ok(Value::String(s)) => s.parse::<Bytes>().ok().map(|b| b.0),
                _ => None,
            })
            .collect();
        let pick = |i: usize| raw.get(i).cloned().flatten();
        Ok(MetadataProbe {
            token,
            is_contract: true,
            name: pick(0).map_or(Field::Absent, |b| decode_string_return(&b)),
            symbol: pick(1).map_or(Field::Absent, |b| decode_string_return(&b)),
            decimals: pick(2).map_or(Field::Absent, |b| decode_decimals(&b)),
            total_supply: pick(3).map_or(Field::Absent, |b| decode_uint_return(&b)),
        })
    }
}

/// ABI-encodes a `string` return value.
pub fn encode_string_return(s: &str) -> Vec<u8> {
    let mut out = vec![0u8; 64];
    out[31] = 0x20;
    out[56..64].copy_from_slice(&(s.len() as u64).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    let pad = (32 - s.len() % 32) % 32;
    out.extend(std::iter::repeat_n(0u8, pad));
    out
}
