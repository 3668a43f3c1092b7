//! Constant-product pool arithmetic. Every division floors toward the pool.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;

pub const MAX_FEE_BPS: u32 = 1000;
const BPS: u32 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmmError {
    #[error("pool has no liquidity")]
    EmptyPool,
    #[error("input amount must be positive")]
    ZeroInput,
    #[error("output rounds to zero")]
    DustOutput,
    #[error("fee {0} bps outside [0, {MAX_FEE_BPS}]")]
    InvalidFee(u32),
    #[error("first provision needs both amounts positive")]
    ZeroAmount,
    #[error("amounts do not match the reserve ratio")]
    RatioMismatch,
    #[error("liquidity minted rounds to zero")]
    ZeroLiquidity,
    #[error("burn of {burned} exceeds LP supply {supply}")]
    BurnExceedsSupply { burned: Amount, supply: Amount },
    #[error("first provision of {minted} LP does not cover the locked {locked}")]
    LockExceedsMint { minted: Amount, locked: Amount },
}

/// Which reserve receives the input of a swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Token0In,
    Token1In,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub reserve0: Amount,
    pub reserve1: Amount,
    pub lp_total_supply: Amount,
    pub fee_bps: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapOutcome {
    pub amount_out: Amount,
    pub state: PoolState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddOutcome {
    /// LP credited to the provider.
    pub lp_minted: Amount,
    /// LP locked at the zero address (first provision only).
    pub locked: Amount,
    pub state: PoolState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoveOutcome {
    pub amount0: Amount,
    pub amount1: Amount,
    pub state: PoolState,
}

fn big(a: &Amount) -> &BigUint {
    a.as_big()
}

fn amt(v: BigUint) -> Amount {
    Amount::from_big(v)
}

/// Output of a constant-product swap with fee `fee_bps`:
/// `floor(a·(10000−f)·y / (x·10000 + a·(10000−f)))`.
pub fn amount_out(x: &BigUint, y: &BigUint, a: &BigUint, fee_bps: u32) -> BigUint {
    let a_eff = a * (BPS - fee_bps);
    let num = &a_eff * y;
    let den = x * BPS + a_eff;
    num / den
}

/// Input of `token_other` needed to keep the reserve ratio when adding
/// `amount` of this side: `ceil(amount·other / this)`.
pub fn proportional(amount: &BigUint, this_reserve: &BigUint, other_reserve: &BigUint) -> BigUint {
    let num = amount * other_reserve;
    (&num + this_reserve - 1u32) / this_reserve
}

impl PoolState {
    pub fn new(fee_bps: u32) -> Result<Self, AmmError> {
        if fee_bps > MAX_FEE_BPS {
            return Err(AmmError::InvalidFee(fee_bps));
        }
        Ok(PoolState { fee_bps, ..Default::default() })
    }

    pub fn product(&self) -> BigUint {
        big(&self.reserve0) * big(&self.reserve1)
    }

    pub fn is_empty(&self) -> bool {
        self.lp_total_supply.is_zero()
    }

    pub fn swap_exact_in(&self, amount_in: &Amount, side: Side) -> Result<SwapOutcome, AmmError> {
        if self.fee_bps > MAX_FEE_BPS {
            return Err(AmmError::InvalidFee(self.fee_bps));
        }
        if amount_in.is_zero() {
            return Err(AmmError::ZeroInput);
        }
        if self.reserve0.is_zero() || self.reserve1.is_zero() {
            return Err(AmmError::EmptyPool);
        }
        let (x, y) = match side {
            Side::Token0In => (big(&self.reserve0), big(&self.reserve1)),
            Side::Token1In => (big(&self.reserve1), big(&self.reserve0)),
        };
        let b = amount_out(x, y, big(amount_in), self.fee_bps);
        if b.is_zero() {
            return Err(AmmError::DustOutput);
        }
        let new_in = x + big(amount_in);
        let new_out = y - &b;
        let (r0, r1) = match side {
            Side::Token0In => (new_in, new_out),
            Side::Token1In => (new_out, new_in),
        };
        Ok(SwapOutcome {
            amount_out: amt(b),
            state: PoolState { reserve0: amt(r0), reserve1: amt(r1), ..self.clone() },
        })
    }

    pub fn add_liquidity(&self, amount0: &Amount, amount1: &Amount) -> Result<AddOutcome, AmmError> {
        self.add_liquidity_locked(amount0, amount1, &Amount::zero())
    }

    /// Like [`PoolState::add_liquidity`], locking `lock` LP at the zero
    /// address on the first provision.
    pub fn add_liquidity_locked(&self, amount0: &Amount, amount1: &Amount, lock: &Amount) -> Result<AddOutcome, AmmError> {
        let (a0, a1) = (big(amount0), big(amount1));
        if self.is_empty() {
            if a0.is_zero() || a1.is_zero() {
                return Err(AmmError::ZeroAmount);
            }
            let total = (a0 * a1).sqrt();
            if total <= *big(lock) {
                return Err(AmmError::LockExceedsMint { minted: amt(total), locked: lock.clone() });
            }
            let state = PoolState {
                reserve0: amount0.clone(),
                reserve1: amount1.clone(),
                lp_total_supply: amt(total.clone()),
                fee_bps: self.fee_bps,
            };
            return Ok(AddOutcome { lp_minted: amt(total - big(lock)), locked: lock.clone(), state });
        }
        let (x, y, l) = (big(&self.reserve0), big(&self.reserve1), big(&self.lp_total_supply));
        // |a0·y − a1·x| ≤ max(x, y) accepts the rounding of either derived side.
        let lhs = a0 * y;
        let rhs = a1 * x;
        let diff = if lhs > rhs { &lhs - &rhs } else { &rhs - &lhs };
        if diff > *x.max(y) {
            return Err(AmmError::RatioMismatch);
        }
        let lp = (a0 * l / x).min(a1 * l / y);
        if lp.is_zero() {
            return Err(AmmError::ZeroLiquidity);
        }
        Ok(AddOutcome {
            lp_minted: amt(lp.clone()),
            locked: Amount::zero(),
            state: PoolState {
                reserve0: amt(x + a0),
                reserve1: amt(y + a1),
                lp_total_supply: amt(l + lp),
                fee_bps: self.fee_bps,
            },
        })
    }

    pub fn remove_liquidity(&self, lp_burned: &Amount) -> Result<RemoveOutcome, AmmError> {
        if lp_burned.is_zero() {
            return Err(AmmError::ZeroInput);
        }
        if lp_burned > &self.lp_total_supply {
            return Err(AmmError::BurnExceedsSupply { burned: lp_burned.clone(), supply: self.lp_total_supply.clone() });
        }
        let l = big(&self.lp_total_supply);
        let b = big(lp_burned);
        let a0 = big(&self.reserve0) * b / l;
        let a1 = big(&self.reserve1) * b / l;
        Ok(RemoveOutcome {
            state: PoolState {
                reserve0: amt(big(&self.reserve0) - &a0),
                reserve1: amt(big(&self.reserve1) - &a1),
                lp_total_supply: amt(l - b),
                fee_bps: self.fee_bps,
            },
            amount0: amt(a0),
            amount1: amt(a1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: u128) -> Amount {
        Amount::from(v)
    }

    fn pool(x: u128, y: u128, fee: u32) -> PoolState {
        PoolState::new(fee).unwrap().add_liquidity(&a(x), &a(y)).unwrap().state
    }

    #[test]
    fn reference_swap_floors_toward_pool() {
        let out = pool(100, 100, 0).swap_exact_in(&a(10), Side::Token0In).unwrap();
        assert_eq!(out.amount_out, a(9));
        assert_eq!((out.state.reserve0.clone(), out.state.reserve1.clone()), (a(110), a(91)));
    }

    #[test]
    fn zero_input_and_empty_pool_rejected() {
        assert_eq!(pool(100, 100, 0).swap_exact_in(&a(0), Side::Token0In), Err(AmmError::ZeroInput));
        assert_eq!(PoolState::new(30).unwrap().swap_exact_in(&a(5), Side::Token1In), Err(AmmError::EmptyPool));
        assert_eq!(pool(1_000_000, 1, 0).swap_exact_in(&a(1), Side::Token0In), Err(AmmError::DustOutput));
    }

    #[test]
    fn round_trip_never_profits() {
        let p = pool(100, 100, 0);
        let first = p.swap_exact_in(&a(10), Side::Token0In).unwrap();
        let back = first.state.swap_exact_in(&first.amount_out, Side::Token1In).unwrap();
        assert!(back.amount_out <= a(10));
    }

    #[test]
    fn onlyfans_first_mint() {
        let lp = PoolState::new(25)
            .unwrap()
            .add_liquidity(&"20e18".parse().unwrap(), &"44e30".parse().unwrap())
            .unwrap()
            .lp_minted;
        assert_eq!(lp, "29664793948382651794845589".parse().unwrap());
    }

    #[test]
    fn doubling_mints_previous_supply() {
        let p = pool(400, 900, 30);
        let out = p.add_liquidity(&a(400), &a(900)).unwrap();
        assert_eq!(out.lp_minted, p.lp_total_supply);
    }

    #[test]
    fn first_provision_needs_both_sides() {
        assert_eq!(PoolState::new(0).unwrap().add_liquidity(&a(0), &a(5)), Err(AmmError::ZeroAmount));
        assert_eq!(pool(100, 100, 0).add_liquidity(&a(10), &a(30)), Err(AmmError::RatioMismatch));
    }

    #[test]
    fn locked_first_mint() {
        let out = PoolState::new(30).unwrap().add_liquidity_locked(&a(1_000_000), &a(1_000_000), &a(1000)).unwrap();
        assert_eq!(out.lp_minted, a(999_000));
        assert_eq!(out.state.lp_total_supply, a(1_000_000));
        assert!(PoolState::new(30).unwrap().add_liquidity_locked(&a(10), &a(10), &a(1000)).is_err());
    }

    #[test]
    fn removal_is_pro_rata() {
        let p = pool(100, 100, 0);
        assert_eq!(p.lp_total_supply, a(100));
        let half = p.remove_liquidity(&a(50)).unwrap();
        assert_eq!((half.amount0, half.amount1), (a(50), a(50)));
        let all = p.remove_liquidity(&a(100)).unwrap();
        assert_eq!((all.amount0, all.amount1), (a(100), a(100)));
        assert!(all.state.reserve0.is_zero() && all.state.lp_total_supply.is_zero());
        assert!(matches!(p.remove_liquidity(&a(101)), Err(AmmError::BurnExceedsSupply { .. })));
    }

    #[test]
    fn fee_bounds() {
        assert_eq!(PoolState::new(1001), Err(AmmError::InvalidFee(1001)));
        assert!(PoolState::new(1000).is_ok());
    }
}
