//! Built-in scenarios and seeded population generators.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sim::{native_label, units, Action, LpAmount, Scenario, Step, DEFAULT_GAS_PRICE};
use crate::amount::Amount;
use crate::ingestion::ChainProfile;
use crate::rugpull::Manipulation;

/// Steps placed at absolute blocks, flattened into a scenario with
/// `advance_blocks` steps in between. Steps in one block keep insertion order.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub scenario: Scenario,
    entries: Vec<(u64, u64, Step)>,
}

impl Schedule {
    pub fn new(name: &str, profile: ChainProfile, start_timestamp: Option<u64>) -> Self {
        Schedule {
            scenario: Scenario {
                name: name.to_string(),
                profile,
                start_timestamp,
                fee_bps: 30,
                lock_minimum_liquidity: false,
                gas_price: DEFAULT_GAS_PRICE,
                external_tokens: BTreeMap::new(),
                steps: Vec::new(),
            },
            entries: Vec::new(),
        }
    }

    pub fn start_block(&self) -> u64 {
        self.scenario.profile.start_block
    }

    pub fn at(&mut self, block: u64, step: Step) {
        assert!(block >= self.start_block(), "block {block} before the schedule start");
        let seq = self.entries.len() as u64;
        self.entries.push((block, seq, step));
    }

    pub fn into_scenario(mut self) -> Scenario {
        self.entries.sort_by_key(|(b, s, _)| (*b, *s));
        let mut block = self.start_block();
        let mut steps = Vec::with_capacity(self.entries.len() * 11 / 10);
        for (b, _, step) in self.entries {
            if b > block {
                steps.push(Step::advance(b - block, None));
                block = b;
            }
            steps.push(step);
        }
        self.scenario.profile.end_block = self.scenario.profile.end_block.max(block);
        self.scenario.steps = steps;
        self.scenario
    }
}

fn create_token(actor: &str, token: &str, name: &str, supply: Amount) -> Step {
    Step::new(
        actor,
        Action::CreateToken {
            token: token.into(),
            name: Some(name.into()),
            symbol: None,
            decimals: 18,
            supply,
            compliant: true,
        },
    )
}

fn create_pool(actor: &str, pool: &str, a: &str, b: &str) -> Step {
    Step::new(actor, Action::CreatePool { pool: pool.into(), token_a: a.into(), token_b: b.into(), factory: None, fee_bps: None })
}

fn add(actor: &str, pool: &str, amounts: &[(&str, Amount)]) -> Step {
    Step::new(
        actor,
        Action::AddLiquidity { pool: pool.into(), amounts: amounts.iter().map(|(k, v)| (k.to_string(), v.clone())).collect() },
    )
}

fn swap(actor: &str, pool: &str, token_in: &str, amount_in: Amount) -> Step {
    Step::new(actor, Action::Swap { pool: pool.into(), token_in: token_in.into(), amount_in })
}

fn snipe(actor: &str, pool: &str, token_in: &str, amount_in: Amount) -> Step {
    Step::new(actor, Action::Snipe { pool: pool.into(), token_in: token_in.into(), amount_in })
}

fn remove(actor: &str, pool: &str, lp: LpAmount) -> Step {
    Step::new(actor, Action::RemoveLiquidity { pool: pool.into(), lp })
}

fn transfer(actor: &str, token: &str, to: &str, amount: Amount) -> Step {
    Step::new(actor, Action::Transfer { token: token.into(), to: to.into(), amount })
}

pub const ONLYFANS_CREATION_BLOCK: u64 = 8_090_747;
pub const ONLYFANS_BURN_BLOCK: u64 = 8_093_101;

/// The OnlyFans exit scam on BSC: token at block 8090747, pool with 20 WBNB
/// and 44 trillion tokens four blocks later, 13 buyers paying 2.67 WBNB in
/// total, full removal at block 8093101 (7101 s after creation).
pub fn onlyfans_case() -> Scenario {
    let mut s = Scenario {
        name: "onlyfans".into(),
        profile: ChainProfile::bsc(ONLYFANS_CREATION_BLOCK, ONLYFANS_BURN_BLOCK),
        start_timestamp: Some(1_623_073_234),
        fee_bps: 25,
        lock_minimum_liquidity: false,
        gas_price: DEFAULT_GAS_PRICE,
        external_tokens: BTreeMap::new(),
        steps: Vec::new(),
    };
    let op = "onlyfans-spammer";
    let pool = "OnlyFans/WBNB";
    let steps = &mut s.steps;
    steps.push(create_token(op, "OnlyFans", "\u{1F48B}OnlyFans", "1e32".parse().unwrap()));
    steps.push(Step::advance(4, Some(12)));
    steps.push(create_pool(op, pool, "OnlyFans", "WBNB"));
    steps.push(add(op, pool, &[("OnlyFans", "44e30".parse().unwrap()), ("WBNB", units("20", 18))]));
    steps.push(Step::advance(2, Some(6)));
    steps.push(swap("onlyfans-victim-01", pool, "WBNB", units("0.002", 18)));
    for i in 2..=13 {
        steps.push(Step::advance(1, Some(3)));
        let amount = if i == 13 { units("0.468", 18) } else { units("0.2", 18) };
        steps.push(swap(&format!("onlyfans-victim-{i:02}"), pool, "WBNB", amount));
    }
    steps.push(Step::advance(ONLYFANS_BURN_BLOCK - ONLYFANS_CREATION_BLOCK - 4 - 2 - 12, Some(7101 - 12 - 6 - 36)));
    steps.push(remove(op, pool, LpAmount::All));
    s
}

fn rand_amount(rng: &mut ChaCha8Rng, lo: &str, hi: &str) -> Amount {
    let lo: Amount = lo.parse().expect("literal");
    let hi: Amount = hi.parse().expect("literal");
    let span = hi.checked_sub(&lo).expect("lo <= hi");
    // 64-bit resolution is plenty for scenario amounts.
    let frac: u64 = rng.gen();
    lo + Amount::from_big((span.as_big() * frac) >> 64)
}

/// Ground truth of a generated exit-scam scenario.
#[derive(Clone, Debug)]
pub struct RugTruth {
    pub operator: String,
    pub pool: String,
    pub manipulation: Manipulation,
    pub victims: usize,
}

/// A random single-pool exit scam: optional aggregated deployment, 0 to 50
/// victims, an operator trading style, varied fees and gas prices.
pub fn random_rug_scenario(seed: u64) -> (Scenario, RugTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let manipulation = [Manipulation::None, Manipulation::Pump, Manipulation::Hedge, Manipulation::WashTrading][rng.gen_range(0..4)];
    let mut s = Scenario {
        name: format!("rug-{seed}"),
        profile: ChainProfile::bsc(10_000_000, 10_000_000),
        start_timestamp: Some(1_620_000_000 + seed * 100),
        fee_bps: [0, 25, 30, 100][rng.gen_range(0..4)],
        lock_minimum_liquidity: rng.gen_bool(0.3),
        gas_price: rng.gen_range(1..=20) * 1_000_000_000,
        external_tokens: BTreeMap::new(),
        steps: Vec::new(),
    };
    let quote = native_label(&s.profile.name);
    let op = format!("rug-{seed}-operator");
    let pool = "scam/quote".to_string();
    let supply = rand_amount(&mut rng, "1e24", "1e33");
    let pooled = Amount::from_big(supply.as_big() * rng.gen_range(50u32..=95) / 100u32);
    let quote_liq = rand_amount(&mut rng, "1e17", "5e19");
    let aggregated = rng.gen_bool(0.3);
    let gas = |rng: &mut ChaCha8Rng, base: u64| rng.gen_range(base / 2..=base * 2);

    let steps = &mut s.steps;
    steps.push(create_token(&op, "SCAM", "Random Scam", supply.clone()).gas(gas(&mut rng, 1_200_000), s.gas_price));
    let mut pool_step = create_pool(&op, &pool, "SCAM", quote);
    let mut add_step = add(&op, &pool, &[("SCAM", pooled.clone()), (quote, quote_liq.clone())]);
    if aggregated {
        pool_step = pool_step.joined();
        add_step = add_step.joined();
    } else {
        steps.push(Step::advance(rng.gen_range(1..=5), None));
        if rng.gen_bool(0.5) {
            add_step = add_step.gas(gas(&mut rng, 180_000), rng.gen_range(1..=30) * 1_000_000_000);
        }
    }
    steps.push(pool_step);
    steps.push(add_step);

    let victims = rng.gen_range(0..=50usize);
    let op_trades = match manipulation {
        Manipulation::None => 0,
        _ => rng.gen_range(1..=6usize),
    };
    // Interleave victim and operator trades at random.
    let mut order: Vec<Option<usize>> = (0..victims).map(Some).chain((0..op_trades).map(|_| None)).collect();
    order.shuffle(&mut rng);
    let mut op_k = 0usize;
    for who in order {
        if rng.gen_bool(0.6) {
            steps.push(Step::advance(rng.gen_range(1..=40), None));
        }
        match who {
            Some(v) => {
                let actor = format!("rug-{seed}-victim-{v}");
                if rng.gen_bool(0.8) {
                    steps.push(swap(&actor, &pool, quote, rand_amount(&mut rng, "1e15", "3e18")));
                } else {
                    let sell = Amount::from_big(pooled.as_big() * rng.gen_range(1u32..=20) / 1000u32);
                    steps.push(swap(&actor, &pool, "SCAM", sell));
                }
            }
            None => {
                let buy = match manipulation {
                    Manipulation::Pump => true,
                    Manipulation::Hedge => false,
                    // Guarantee at least one trade of each direction.
                    _ => op_k.is_multiple_of(2),
                };
                let step = if buy {
                    swap(&op, &pool, quote, rand_amount(&mut rng, "1e15", "1e18"))
                } else {
                    let sell = Amount::from_big(pooled.as_big() * rng.gen_range(1u32..=30) / 1000u32);
                    swap(&op, &pool, "SCAM", sell)
                };
                steps.push(step.gas(gas(&mut rng, 120_000), rng.gen_range(1..=30) * 1_000_000_000));
                op_k += 1;
            }
        }
    }
    let manipulation = if manipulation == Manipulation::WashTrading && op_k < 2 {
        // Wash trading needs a sell after the lone buy.
        steps.push(swap(&op, &pool, "SCAM", Amount::from_big(pooled.as_big() / 500u32)));
        Manipulation::WashTrading
    } else {
        manipulation
    };
    steps.push(Step::advance(rng.gen_range(1..=2000), None));
    let lp = if rng.gen_bool(0.7) { LpAmount::All } else { LpAmount::ShareBps(rng.gen_range(9901..=10_000)) };
    steps.push(remove(&op, &pool, lp));
    (s, RugTruth { operator: op, pool, manipulation, victims })
}

/// Kinds of non-scam pools in the detection population.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegitKind {
    TwoMints,
    PartialBurn,
    NoBurn,
    TwoBurns,
    TwoMintsOneBurn,
}

/// `rugs` single-mint/near-full-burn pools and `legit` pools that break the
/// rule in one way each, in one scenario. Returns pool label → is scam.
pub fn detection_population(seed: u64, rugs: usize, legit: usize) -> (Scenario, BTreeMap<String, bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sch = Schedule::new(&format!("detect-{seed}"), ChainProfile::bsc(5_000_000, 5_000_000), Some(1_615_000_000));
    let quote = native_label("bsc");
    let mut kinds: Vec<Option<LegitKind>> = (0..rugs).map(|_| None).collect();
    let legit_kinds = [LegitKind::TwoMints, LegitKind::PartialBurn, LegitKind::NoBurn, LegitKind::TwoBurns, LegitKind::TwoMintsOneBurn];
    kinds.extend((0..legit).map(|i| Some(legit_kinds[i % legit_kinds.len()])));
    kinds.shuffle(&mut rng);
    let mut truth = BTreeMap::new();
    let start = sch.start_block();
    for (i, kind) in kinds.into_iter().enumerate() {
        let op = format!("detect-op-{}", rng.gen_range(0..150));
        let token = format!("T{i}");
        let pool = format!("P{i}");
        let mut b = start + i as u64 * 3;
        sch.at(b, create_token(&op, &token, &format!("Token {i}"), "1e27".parse().unwrap()));
        b += rng.gen_range(0..4);
        sch.at(b, create_pool(&op, &pool, &token, quote));
        sch.at(b, add(&op, &pool, &[(&token, "5e26".parse().unwrap()), (quote, rand_amount(&mut rng, "1e18", "2e19"))]));
        let second_provider = format!("detect-lp-{i}");
        if matches!(kind, Some(LegitKind::TwoMints) | Some(LegitKind::TwoMintsOneBurn)) {
            // A token-holding second provider: the operator hands over tokens first.
            sch.at(b + 1, transfer(&op, &token, &second_provider, "1e25".parse().unwrap()));
            sch.at(b + 2, add(&second_provider, &pool, &[(quote, rand_amount(&mut rng, "1e16", "1e17"))]));
        }
        for v in 0..rng.gen_range(0..8) {
            sch.at(b + 3 + v, swap(&format!("detect-trader-{}", rng.gen_range(0..400)), &pool, quote, rand_amount(&mut rng, "1e15", "1e18")));
        }
        let end = b + 20 + rng.gen_range(0..200);
        match kind {
            None => {
                // 9901 bps: flooring the burned amount keeps it at or above 99%.
                let lp = if rng.gen_bool(0.5) { LpAmount::All } else { LpAmount::ShareBps(rng.gen_range(9901..=10_000)) };
                sch.at(end, remove(&op, &pool, lp));
            }
            Some(LegitKind::TwoMints) => {
                sch.at(end, remove(&op, &pool, LpAmount::All));
                sch.at(end + 1, remove(&second_provider, &pool, LpAmount::All));
            }
            Some(LegitKind::TwoMintsOneBurn) => sch.at(end, remove(&op, &pool, LpAmount::All)),
            Some(LegitKind::PartialBurn) => sch.at(end, remove(&op, &pool, LpAmount::ShareBps(rng.gen_range(5000..9900)))),
            Some(LegitKind::NoBurn) => {}
            Some(LegitKind::TwoBurns) => {
                sch.at(end, remove(&op, &pool, LpAmount::ShareBps(rng.gen_range(1000..9000))));
                sch.at(end + 5, remove(&op, &pool, LpAmount::All));
            }
        }
        truth.insert(pool, kind.is_none());
    }
    (sch.into_scenario(), truth)
}

/// Ground truth of the sniper population.
#[derive(Clone, Debug)]
pub struct SniperTruth {
    pub bots: BTreeSet<String>,
    pub pools: usize,
    pub bot_pools: usize,
    pub bot_first_swaps: usize,
    pub bot_same_block: usize,
}

/// 5 bots each sniping 100 of 173 covered pools (out of 200), 31% of their
/// first swaps in the liquidity block and the rest within 4 blocks; 500
/// ordinary traders, two of them near-miss decoys (99 pools at delay 0, and
/// 150 pools at mean delay exactly 5). All pools are exit scams.
pub fn sniper_population(seed: u64) -> (Scenario, SniperTruth) {
    const POOLS: usize = 200;
    const COVERED: usize = 173;
    const BOTS: usize = 5;
    const PER_BOT: usize = 100;
    const SAME_BLOCK_PER_BOT: usize = 31;
    const TRADERS: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sch = Schedule::new(&format!("snipers-{seed}"), ChainProfile::bsc(9_000_000, 9_000_000), Some(1_625_000_000));
    let quote = native_label("bsc");
    let start = sch.start_block();
    let liquidity_block: Vec<u64> = (0..POOLS).map(|p| start + 2 + p as u64 * 7).collect();
    // (pool, actor, delay)
    let mut swaps: Vec<(usize, String, u64)> = Vec::new();
    let mut bots = BTreeSet::new();
    for bot in 0..BOTS {
        let name = format!("sniper-bot-{bot}");
        let mut delays: Vec<u64> = (0..PER_BOT).map(|k| if k < SAME_BLOCK_PER_BOT { 0 } else { rng.gen_range(1..=4) }).collect();
        delays.shuffle(&mut rng);
        for (k, d) in delays.into_iter().enumerate() {
            swaps.push(((bot * 35 + k) % COVERED, name.clone(), d));
        }
        bots.insert(name);
    }
    let mut all_pools: Vec<usize> = (0..POOLS).collect();
    for t in 0..TRADERS {
        let name = format!("trader-{t}");
        let (n, delay): (usize, Box<dyn Fn(&mut ChaCha8Rng) -> u64>) = match t {
            0 => (99, Box::new(|_| 0)),
            1 => (150, Box::new(|_| 5)),
            _ => (rng.gen_range(1..=12), Box::new(|r: &mut ChaCha8Rng| r.gen_range(0..300))),
        };
        all_pools.shuffle(&mut rng);
        for &p in &all_pools[..n] {
            let d = delay(&mut rng);
            swaps.push((p, name.clone(), d));
        }
    }
    for p in 0..POOLS {
        let op = format!("sniper-pool-op-{}", p % 40);
        let token = format!("S{p}");
        let pool = format!("SP{p}");
        let l = liquidity_block[p];
        sch.at(l - 2, create_token(&op, &token, &format!("Snipe {p}"), "1e27".parse().unwrap()));
        sch.at(l, create_pool(&op, &pool, &token, quote));
        sch.at(l, add(&op, &pool, &[(&token, "9e26".parse().unwrap()), (quote, units("10", 18))]));
    }
    swaps.sort_by_key(|(p, _, d)| (*d, *p));
    for (p, actor, d) in &swaps {
        let amount = rand_amount(&mut rng, "1e16", "1e17");
        let pool = format!("SP{p}");
        let step = if *d == 0 { snipe(actor, &pool, quote, amount) } else { swap(actor, &pool, quote, amount) };
        sch.at(liquidity_block[*p] + d, step);
    }
    for p in 0..POOLS {
        let op = format!("sniper-pool-op-{}", p % 40);
        sch.at(liquidity_block[p] + 320, remove(&op, &format!("SP{p}"), LpAmount::All));
    }
    let truth = SniperTruth {
        bots,
        pools: POOLS,
        bot_pools: COVERED,
        bot_first_swaps: BOTS * PER_BOT,
        bot_same_block: BOTS * SAME_BLOCK_PER_BOT,
    };
    (sch.into_scenario(), truth)
}

/// Token-count population for the creator statistics: the top 1% of 2000
/// creators hold 2430 of 10000 tokens.
pub fn spammer_population(seed: u64) -> (Scenario, BTreeSet<String>) {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for i in 0..10 {
        counts.push((format!("spammer-{i}"), 122));
        counts.push((format!("spammer-{}", i + 10), 121));
    }
    for i in 0..370 {
        counts.push((format!("creator-11-{i}"), 11));
    }
    for i in 0..210 {
        counts.push((format!("creator-10-{i}"), 10));
    }
    for i in 0..1400 {
        counts.push((format!("creator-1-{i}"), 1));
    }
    let spammers = counts.iter().filter(|(_, n)| *n > 100).map(|(c, _)| c.clone()).collect();
    let mut creations: Vec<String> = counts.into_iter().flat_map(|(c, n)| std::iter::repeat_n(c, n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    creations.shuffle(&mut rng);
    let mut sch = Schedule::new(&format!("spam-{seed}"), ChainProfile::bsc(7_000_000, 7_000_000), Some(1_612_000_000));
    let start = sch.start_block();
    for (i, c) in creations.iter().enumerate() {
        sch.at(start + (i / 50) as u64, create_token(c, &format!("spam{i}"), &format!("Spam {i}"), "1e24".parse().unwrap()));
    }
    (sch.into_scenario(), spammers)
}

/// Lifetime population on BSC timing: `one_block` tokens with no later
/// event, `one_day` tokens whose last event is 1..=28799 blocks (under
/// 86400 s) after creation, the rest at 28800 blocks or later.
pub fn lifetime_population(seed: u64, one_block: usize, one_day: usize, longer: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sch = Schedule::new(&format!("life-{seed}"), ChainProfile::bsc(6_000_000, 6_000_000), Some(1_611_000_000));
    let start = sch.start_block();
    let mut kinds: Vec<u8> = std::iter::repeat_n(0, one_block).chain(std::iter::repeat_n(1, one_day)).chain(std::iter::repeat_n(2, longer)).collect();
    kinds.shuffle(&mut rng);
    for (i, k) in kinds.into_iter().enumerate() {
        let creator = format!("life-creator-{}", rng.gen_range(0..300));
        let token = format!("L{i}");
        let b = start + i as u64;
        sch.at(b, create_token(&creator, &token, &format!("Life {i}"), "1e24".parse().unwrap()));
        let last = match k {
            0 => None,
            1 => Some(b + rng.gen_range(1..=28_799)),
            _ => Some(b + rng.gen_range(28_800..=400_000)),
        };
        if let Some(last) = last {
            if last > b + 1 && rng.gen_bool(0.5) {
                sch.at(rng.gen_range(b + 1..last), transfer(&creator, &token, "holder", "1e20".parse().unwrap()));
            }
            sch.at(last, transfer(&creator, &token, "holder", "1e20".parse().unwrap()));
        }
    }
    sch.into_scenario()
}

/// A mixed synthetic chain of about `target_records` fixture records (the count
/// is estimated while scheduling and lands within 0.5% of the target):
/// spammer deployments, exit scams with victims and snipers, and
/// long-lived pools with repeated liquidity changes.
pub fn synthetic_chain(seed: u64, target_records: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sch = Schedule::new(&format!("synthetic-{seed}"), ChainProfile::bsc(12_000_000, 12_000_000), Some(1_630_000_000));
    let quote = native_label("bsc");
    let start = sch.start_block();
    // Records per pool are estimated as they are scheduled.
    let mut records = 0usize;
    let mut i = 0usize;
    let words = ["shiba", "moon", "swap", "finance", "galaxy", "onlyfans", "safe", "elon", "pornhub", "cake", "baby", "doge"];
    while records < target_records {
        let b = start + (i as u64) * 2;
        let creator = if rng.gen_bool(0.3) { format!("syn-spammer-{}", rng.gen_range(0..10)) } else { format!("syn-creator-{i}") };
        let token = format!("X{i}");
        let name = format!("{} {}", words[rng.gen_range(0..words.len())], words[rng.gen_range(0..words.len())]);
        sch.at(b, create_token(&creator, &token, &name, "1e30".parse().unwrap()));
        records += 2;
        if rng.gen_bool(0.15) {
            i += 1;
            continue;
        }
        let pool = format!("XP{i}");
        let l = b + rng.gen_range(0..5);
        sch.at(l, create_pool(&creator, &pool, &token, quote));
        sch.at(l, add(&creator, &pool, &[(&token, "5e29".parse().unwrap()), (quote, rand_amount(&mut rng, "5e18", "5e19"))]));
        records += 2 + 4;
        for bot in 0..2 {
            if rng.gen_bool(0.5) {
                sch.at(l, snipe(&format!("syn-bot-{bot}"), &pool, quote, rand_amount(&mut rng, "1e16", "1e17")));
                records += 3;
            }
        }
        let swaps = rng.gen_range(40..200);
        let mut last = l;
        for _ in 0..swaps {
            last += rng.gen_range(0..3);
            let trader = format!("syn-trader-{}", rng.gen_range(0..5000));
            let step = if rng.gen_bool(0.8) {
                swap(&trader, &pool, quote, rand_amount(&mut rng, "1e15", "1e17"))
            } else {
                swap(&trader, &pool, &token, rand_amount(&mut rng, "1e24", "1e26"))
            };
            sch.at(last.max(l + 1), step);
            records += 3;
        }
        if rng.gen_bool(0.6) {
            sch.at(last + 5, remove(&creator, &pool, LpAmount::All));
        } else {
            sch.at(last + 5, add(&creator, &pool, &[(quote, units("1", 18))]));
            sch.at(last + 40_000, remove(&creator, &pool, LpAmount::ShareBps(5000)));
            records += 5;
        }
        records += 5;
        i += 1;
    }
    sch.scenario.fee_bps = 25;
    sch.into_scenario()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::run_scenario;

    #[test]
    fn schedule_inserts_advances() {
        let mut sch = Schedule::new("s", ChainProfile::bsc(10, 10), Some(100));
        sch.at(15, transfer("a", "x", "b", Amount::from(1u8)));
        sch.at(10, transfer("a", "x", "b", Amount::from(2u8)));
        sch.at(15, transfer("a", "x", "b", Amount::from(3u8)));
        let s = sch.into_scenario();
        assert_eq!(s.steps.len(), 4);
        assert_eq!(s.steps[1].action, Action::AdvanceBlocks { blocks: 5, seconds: None });
        assert_eq!(s.profile.end_block, 15);
    }

    #[test]
    fn onlyfans_runs() {
        let out = run_scenario(&onlyfans_case()).unwrap();
        out.fixture.validate().unwrap();
        out.ledger.check_conservation().unwrap();
        let last = out.fixture.records.last().unwrap();
        assert_eq!(last.order_key().0, ONLYFANS_BURN_BLOCK);
        assert_eq!(last.timestamp(), Some(1_623_073_234 + 7101));
    }

    #[test]
    fn random_rugs_run() {
        for seed in 0..40 {
            let (s, _) = random_rug_scenario(seed);
            let out = run_scenario(&s).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            out.fixture.validate().unwrap();
        }
    }
}
