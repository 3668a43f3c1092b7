//! Ground-truth value flows recorded by the simulator.

use std::collections::BTreeMap;

use thiserror::Error;

use super::math::PoolState;
use crate::amount::{Amount, SignedAmount};
use crate::chain::Address;
use crate::tables::Table;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("pool {pool} token {token}: net actor flow {flow} does not match reserve {reserve}")]
pub struct ConservationError {
    pub pool: Address,
    pub token: Address,
    pub flow: SignedAmount,
    pub reserve: Amount,
}

/// Signed token flows between actors and pools (positive: the actor
/// received from the pool) and gas fees per transaction sender.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub flows: BTreeMap<(Address, Address, Address), SignedAmount>,
    pub gas: BTreeMap<Address, Amount>,
    /// Final state and token pair of every pool.
    pub pools: BTreeMap<Address, (Address, Address, PoolState)>,
}

impl Ledger {
    pub fn record(&mut self, actor: Address, pool: Address, token: Address, delta: SignedAmount) {
        let e = self.flows.entry((actor, pool, token)).or_default();
        *e = std::mem::take(e) + delta;
    }

    pub fn add_gas(&mut self, actor: Address, fee: Amount) {
        *self.gas.entry(actor).or_default() += fee;
    }

    pub fn pool_flow(&self, actor: Address, pool: Address, token: Address) -> SignedAmount {
        self.flows.get(&(actor, pool, token)).cloned().unwrap_or_default()
    }

    /// Net amount of `token` the actor received across all pools.
    pub fn net_flow(&self, actor: Address, token: Address) -> SignedAmount {
        self.flows
            .iter()
            .filter(|((a, _, t), _)| *a == actor && *t == token)
            .map(|(_, v)| v.clone())
            .sum()
    }

    pub fn gas_of(&self, actor: Address) -> Amount {
        self.gas.get(&actor).cloned().unwrap_or_default()
    }

    /// Sum over actors of flows for one pool side, negated: what the pool should hold.
    pub fn pool_balance(&self, pool: Address, token: Address) -> SignedAmount {
        -self
            .flows
            .iter()
            .filter(|((_, p, t), _)| *p == pool && *t == token)
            .map(|(_, v)| v.clone())
            .sum::<SignedAmount>()
    }

    /// Every pool's reserves equal the net of what actors put in.
    pub fn check_conservation(&self) -> Result<(), ConservationError> {
        for (pool, (t0, t1, state)) in &self.pools {
            for (token, reserve) in [(*t0, &state.reserve0), (*t1, &state.reserve1)] {
                let held = self.pool_balance(*pool, token);
                if held != reserve.to_signed() {
                    return Err(ConservationError { pool: *pool, token, flow: held, reserve: reserve.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn flows_table(&self) -> Table {
        let mut t = Table::new(&["actor", "pool", "token", "net_flow"]);
        for ((a, p, tok), v) in &self.flows {
            t.push(vec![a.to_string(), p.to_string(), tok.to_string(), v.to_string()]);
        }
        t
    }

    pub fn gas_table(&self) -> Table {
        let mut t = Table::new(&["actor", "gas_fees"]);
        for (a, v) in &self.gas {
            t.push(vec![a.to_string(), v.to_string()]);
        }
        t
    }
}
