//! Deterministic inputs shared by the benchmarks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poolsleuth::amm::scenarios::{detection_population, synthetic_chain};
use poolsleuth::amm::{run_scenario, units, Side};
use poolsleuth::chain::{keccak_selector, signatures as sig, Selector};
use poolsleuth::ingestion::write_fixture_string;
use poolsleuth::pipeline::{Pipeline, PipelineConfig};
use poolsleuth::rugpull::Scope;
use poolsleuth::tokens::assemble_dispatcher;
use poolsleuth::{Address, Amount, FixtureFile, PoolState, PoolTimeline};

/// A seeded pool and `n` swaps against it.
pub fn swap_inputs(n: usize, seed: u64) -> (PoolState, Vec<(Amount, Side)>) {
    let pool = PoolState::new(30)
        .expect("fee in range")
        .add_liquidity(&units("5000", 18), &units("20000000", 18))
        .expect("first mint")
        .state;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let swaps = (0..n)
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Token0In } else { Side::Token1In };
            (Amount::from(rng.gen_range(1u128..=1u128 << 70)), side)
        })
        .collect();
    (pool, swaps)
}

/// Dispatcher bytecodes of growing size, every other one a full ERC-20.
pub fn bytecodes(n: usize) -> Vec<Vec<u8>> {
    let base: Vec<Selector> = [
        sig::TOTAL_SUPPLY,
        sig::BALANCE_OF,
        sig::TRANSFER,
        sig::TRANSFER_FROM,
        sig::APPROVE,
        sig::ALLOWANCE,
        sig::NAME,
        sig::SYMBOL,
        sig::DECIMALS,
    ]
    .iter()
    .map(|s| keccak_selector(s))
    .collect();
    (0..n)
        .map(|i| {
            let mut sels: Vec<Selector> = if i % 2 == 0 { base.clone() } else { base[1..].to_vec() };
            sels.extend((0..i % 40).map(|k| keccak_selector(&format!("extra{k}(uint256)"))));
            assemble_dispatcher(&sels)
        })
        .collect()
}

/// Fixture text of a synthetic chain with about `records` lines.
pub fn fixture_text(records: usize, seed: u64) -> String {
    let sim = run_scenario(&synthetic_chain(seed, records)).expect("synthetic chain runs");
    write_fixture_string(&sim.fixture).expect("fixture serializes")
}

pub fn synthetic_fixture(records: usize, seed: u64) -> FixtureFile {
    run_scenario(&synthetic_chain(seed, records)).expect("synthetic chain runs").fixture
}

/// Pool timelines of the detection population.
pub fn timelines(seed: u64, rugs: usize, legit: usize) -> BTreeMap<Address, PoolTimeline> {
    let sim = run_scenario(&detection_population(seed, rugs, legit).0).expect("population runs");
    let cfg = PipelineConfig { scope: Scope::All, workers: 1, ..PipelineConfig::default() };
    let (_, d) = Pipeline::in_memory(cfg, sim.fixture).run().expect("pipeline");
    d.timelines.timelines
}
