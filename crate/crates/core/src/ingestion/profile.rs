use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::Address;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("mean block interval must be positive, got {0}")]
    Interval(f64),
    #[error("start block {start} is after end block {end}")]
    Range { start: u64, end: u64 },
}

/// Per-chain parameters shared by ingestion and the detectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainProfile {
    pub name: String,
    /// Seconds between blocks on average.
    pub mean_block_interval: f64,
    pub start_block: u64,
    pub end_block: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrapped_native_token: Option<Address>,
    /// Sniper flagging: mean first-swap delay must be below this many blocks.
    pub sniper_delay_blocks: u64,
    /// Sniper flagging: minimum number of distinct pools swapped in.
    pub sniper_min_pools: usize,
}

pub const WBNB: &str = "0xbb4cdb9cbd36b01bd1cbaebf2de08d9173bc095c";
pub const WETH: &str = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2";

impl ChainProfile {
    pub fn bsc(start_block: u64, end_block: u64) -> Self {
        ChainProfile {
            name: "bsc".into(),
            mean_block_interval: 3.0,
            start_block,
            end_block,
            wrapped_native_token: Some(WBNB.parse().expect("static address")),
            sniper_delay_blocks: 5,
            sniper_min_pools: 100,
        }
    }

    pub fn ethereum(start_block: u64, end_block: u64) -> Self {
        ChainProfile {
            name: "ethereum".into(),
            mean_block_interval: 15.0,
            start_block,
            end_block,
            wrapped_native_token: Some(WETH.parse().expect("static address")),
            sniper_delay_blocks: 3,
            sniper_min_pools: 10,
        }
    }

    /// Named preset, falling back to a custom profile with Ethereum timing.
    pub fn preset(name: &str, start_block: u64, end_block: u64) -> Self {
        match name {
            "bsc" => Self::bsc(start_block, end_block),
            "ethereum" | "eth" => Self::ethereum(start_block, end_block),
            other => ChainProfile {
                name: other.to_string(),
                wrapped_native_token: None,
                ..Self::ethereum(start_block, end_block)
            },
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.mean_block_interval > 0.0) {
            return Err(ProfileError::Interval(self.mean_block_interval));
        }
        if self.start_block > self.end_block {
            return Err(ProfileError::Range { start: self.start_block, end: self.end_block });
        }
        Ok(())
    }

    pub fn contains_block(&self, n: u64) -> bool {
        (self.start_block..=self.end_block).contains(&n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_sniper_defaults() {
        let b = ChainProfile::bsc(0, 10);
        assert_eq!((b.sniper_delay_blocks, b.sniper_min_pools), (5, 100));
        assert_eq!(b.mean_block_interval, 3.0);
        let e = ChainProfile::ethereum(0, 10);
        assert_eq!((e.sniper_delay_blocks, e.sniper_min_pools), (3, 10));
        assert_eq!(e.mean_block_interval, 15.0);
    }

    #[test]
    fn validation() {
        assert!(ChainProfile::bsc(5, 4).validate().is_err());
        let mut p = ChainProfile::bsc(0, 1);
        p.mean_block_interval = 0.0;
        assert_eq!(p.validate(), Err(ProfileError::Interval(0.0)));
    }
}
