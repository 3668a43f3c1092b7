use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use poolsleuth::amm::{PoolState, Side};
use poolsleuth::analytics::{flag_spammers, lifetime_cdf, lifetime_of, parse_grid, CreatorProfile, LifetimeClass, SubjectKind};
use poolsleuth::chain::{BlockRef, Hash32};
use poolsleuth::ingestion::{read_fixture_str, write_fixture_string, ChainProfile, FixtureFile, Record};
use poolsleuth::names::{classify, normalize_name, ReferenceLists};
use poolsleuth::pools::{EventMeta, MintEvent, PoolEvent, PoolRecord, PoolTimeline, SwapEvent, BurnEvent};
use poolsleuth::rugpull::detect_exit_scam;
use poolsleuth::snipers::{flag_snipers, swap_latencies, SwapLatency};
use poolsleuth::{Address, Amount, LogRecord};

fn amount() -> impl Strategy<Value = Amount> {
    (1u128..=u128::MAX >> 8).prop_map(Amount::from)
}

fn seeded_pool(fee: u32, r0: &Amount, r1: &Amount) -> PoolState {
    PoolState::new(fee).unwrap().add_liquidity(r0, r1).unwrap().state
}

proptest! {
    #[test]
    fn zero_fee_swap_keeps_product_within_flooring_bound(r0 in amount(), r1 in amount(), a in amount(), t0 in any::<bool>()) {
        let p = seeded_pool(0, &r0, &r1);
        let side = if t0 { Side::Token0In } else { Side::Token1In };
        if let Ok(out) = p.swap_exact_in(&a, side) {
            let before = p.product();
            let after = out.state.product();
            prop_assert!(after >= before);
            let x = if t0 { r0.as_big() } else { r1.as_big() };
            prop_assert!(after - before < x + a.as_big());
        }
    }

    #[test]
    fn fee_swap_strictly_increases_product(r0 in amount(), r1 in amount(), a in amount(), fee in 1u32..=1000, t0 in any::<bool>()) {
        let p = seeded_pool(fee, &r0, &r1);
        let side = if t0 { Side::Token0In } else { Side::Token1In };
        if let Ok(out) = p.swap_exact_in(&a, side) {
            prop_assert!(out.state.product() > p.product());
        }
    }

    #[test]
    fn add_then_remove_never_profits(r0 in amount(), r1 in amount(), k in 1u64..1_000_000, d in 1u64..1_000_000) {
        let p = seeded_pool(30, &r0, &r1);
        // a0 proportional to the pool, a1 derived with rounding up
        let a0 = Amount::from_big(r0.as_big() * k / d + 1u32);
        let a1 = Amount::from_big(poolsleuth::amm::math::proportional(a0.as_big(), r0.as_big(), r1.as_big()));
        if let Ok(add) = p.add_liquidity(&a0, &a1) {
            let rem = add.state.remove_liquidity(&add.lp_minted).unwrap();
            prop_assert!(rem.amount0 <= a0);
            prop_assert!(rem.amount1 <= a1);
        }
    }

    #[test]
    fn normalization_is_idempotent(s in "\\PC{0,40}") {
        let once = normalize_name(&s);
        prop_assert_eq!(normalize_name(&once), once);
    }

    #[test]
    fn adding_list_terms_only_grows_matches(name in "[a-z ]{0,20}", extra in "[a-z]{2,6}") {
        let base = ReferenceLists::sample();
        let mut more = base.clone();
        more.meme_keywords.insert(extra);
        let a = classify(Address::ZERO, &name, &base);
        let b = classify(Address::ZERO, &name, &more);
        prop_assert!(a.categories.is_subset(&b.categories));
    }

    #[test]
    fn lifetime_classes_partition(blocks in 0u64..100_000, interval in 1u32..20) {
        let r = lifetime_of(Address::ZERO, SubjectKind::Token, BlockRef::new(1), BlockRef::new(1 + blocks), interval as f64).unwrap();
        let one_block = r.class == LifetimeClass::OneBlock;
        let one_day = r.class == LifetimeClass::OneDay;
        let longer = r.class == LifetimeClass::Longer;
        prop_assert_eq!(one_block as u8 + one_day as u8 + longer as u8, 1);
        prop_assert_eq!(one_block, blocks == 0);
        if !one_block {
            prop_assert_eq!(one_day, r.lifetime_seconds < 86_400.0);
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded(lifes in prop::collection::vec(0u64..200_000, 1..60)) {
        let recs: Vec<_> = lifes
            .iter()
            .map(|b| lifetime_of(Address::ZERO, SubjectKind::Pool, BlockRef::new(0), BlockRef::new(*b), 3.0).unwrap())
            .collect();
        let rows = lifetime_cdf(&recs, &parse_grid("1b,10m,1h,4h,24h,7d").unwrap(), 3.0).unwrap();
        let mut prev = 0.0;
        for r in rows {
            prop_assert!((0.0..=1.0).contains(&r.fraction));
            prop_assert!(r.fraction >= prev);
            prev = r.fraction;
        }
    }

    #[test]
    fn spammer_flags_survive_population_duplication(counts in prop::collection::vec(1usize..50, 1..120), m in 1usize..120) {
        let m = m.min(counts.len());
        let p = m as f64 / counts.len() as f64;
        let mk = |copy: usize| -> Vec<CreatorProfile> {
            counts.iter().enumerate().map(|(i, n)| CreatorProfile {
                creator: Address::derive(&format!("{copy}-{i}")),
                tokens_created: *n,
                via_creation_tx: *n,
                via_internal: 0,
                one_day_tokens: 0,
                is_spammer: false,
            }).collect()
        };
        let mut single = mk(0);
        let s1 = flag_spammers(&mut single, p).unwrap();
        let mut double: Vec<CreatorProfile> = mk(0).into_iter().chain(mk(1)).collect();
        let s2 = flag_spammers(&mut double, p).unwrap();
        prop_assert_eq!(s1.threshold, s2.threshold);
        prop_assert_eq!(2 * s1.spammers, s2.spammers);
        let flags = |v: &[CreatorProfile]| -> BTreeMap<Address, bool> { v.iter().map(|c| (c.creator, c.is_spammer)).collect() };
        let in_double = flags(&double);
        for (a, f) in flags(&single) {
            prop_assert_eq!(in_double[&a], f);
        }
        let flagged_share: f64 = single.iter().filter(|c| c.is_spammer).map(|c| c.tokens_created).sum::<usize>() as f64
            / single.iter().map(|c| c.tokens_created).sum::<usize>() as f64;
        prop_assert!((flagged_share - s1.spammer_share).abs() < 1e-12);
    }

    #[test]
    fn sniper_flags_are_monotone_in_thresholds(
        delays in prop::collection::vec((0u8..6, 0u8..40, 0u64..12), 1..300),
        d in 1u64..8,
        n in 1usize..20,
    ) {
        let lat: Vec<SwapLatency> = delays
            .iter()
            .map(|(t, p, dl)| SwapLatency {
                trader: Address::derive(&format!("t{t}")),
                pool: Address::derive(&format!("p{p}")),
                delay_blocks: *dl,
                same_block: *dl == 0,
            })
            .collect();
        let strict: BTreeSet<Address> = flag_snipers(&lat, d, n + 1).unwrap().into_iter().filter(|v| v.flagged).map(|v| v.trader).collect();
        let loose: BTreeSet<Address> = flag_snipers(&lat, d + 1, n).unwrap().into_iter().filter(|v| v.flagged).map(|v| v.trader).collect();
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn detection_ignores_swaps_and_is_monotone(
        minted in 1_000u64..1_000_000,
        burned_ppm in 900_000u64..=1_000_000,
        swaps in prop::collection::vec(1u64..50, 0..10),
        theta in 0.9f64..1.0,
        lower in 0.0f64..0.1,
    ) {
        let burned = minted * burned_ppm / 1_000_000;
        let with = timeline(minted, burned, &swaps);
        let without = timeline(minted, burned, &[]);
        let a = detect_exit_scam(&with, theta).unwrap().is_some();
        let b = detect_exit_scam(&without, theta).unwrap().is_some();
        prop_assert_eq!(a, b);
        if a {
            prop_assert!(detect_exit_scam(&with, theta - lower).unwrap().is_some());
        }
    }

    #[test]
    fn later_swaps_do_not_move_first_swap_latency(extra in prop::collection::vec(1u64..30, 0..8)) {
        let base = timeline(1000, 0, &[3]);
        let mut more = base.clone();
        for (i, b) in extra.iter().enumerate() {
            more.events.push(swap(20 + *b, i as u64, "v0"));
        }
        more.events.sort_by_key(PoolEvent::order_key);
        let tl = |t: PoolTimeline| -> BTreeMap<Address, PoolTimeline> { [(t.record.pool, t)].into() };
        let a = swap_latencies(&tl(base), None).unwrap();
        let b = swap_latencies(&tl(more), None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fixture_text_roundtrips(n in 0usize..20, seed in any::<u64>()) {
        let mut f = FixtureFile::new(ChainProfile::bsc(100, 200));
        for i in 0..n {
            f.records.push(Record::Log(LogRecord {
                emitter: Address::derive(&format!("e{}", seed % 7)),
                block: BlockRef::at(100 + i as u64, 1000 + 3 * i as u64),
                index: i as u64,
                tx_hash: Hash32([i as u8; 32]),
                tx_sender: Address::derive("s"),
                topic0: poolsleuth::chain::EventTopics::get().transfer,
                indexed_topics: vec![],
                data: poolsleuth::Bytes(seed.to_be_bytes().to_vec()),
                gas_used: seed % 1000,
                gas_price: 7,
            }));
        }
        let text = write_fixture_string(&f).unwrap();
        let back = read_fixture_str(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(write_fixture_string(&back).unwrap(), text);
    }
}

fn meta(block: u64, index: u64, who: &str) -> EventMeta {
    EventMeta {
        pool: Address::derive("pool"),
        block: BlockRef::new(block),
        index,
        tx_hash: Hash32::default(),
        tx_sender: Address::derive(who),
        gas_used: 1,
        gas_price: 1,
    }
}

fn swap(block: u64, index: u64, who: &str) -> PoolEvent {
    PoolEvent::Swap(SwapEvent {
        meta: meta(block, index, who),
        amount0_in: Amount::from(5u8),
        amount1_in: Amount::zero(),
        amount0_out: Amount::zero(),
        amount1_out: Amount::from(1u8),
        to: Address::derive(who),
    })
}

fn timeline(minted: u64, burned: u64, swaps: &[u64]) -> PoolTimeline {
    let mut events = vec![PoolEvent::Mint(MintEvent {
        meta: meta(10, 0, "op"),
        lp_amount: Amount::from(minted),
        amount0: Amount::from(100u8),
        amount1: Amount::from(100u8),
    })];
    for (i, b) in swaps.iter().enumerate() {
        events.push(swap(10 + b, i as u64, &format!("v{i}")));
    }
    if burned > 0 {
        events.push(PoolEvent::Burn(BurnEvent {
            meta: meta(100, 0, "op"),
            lp_amount: Amount::from(burned),
            amount0: Amount::from(1u8),
            amount1: Amount::from(1u8),
            to: Address::derive("op"),
        }));
    }
    PoolTimeline {
        record: PoolRecord {
            pool: Address::derive("pool"),
            factory: Address::ZERO,
            creator: Address::derive("op"),
            token0: Address::derive("a"),
            token1: Address::derive("b"),
            created_block: BlockRef::new(9),
            created_index: 0,
            tx_hash: Hash32::default(),
            last_event_block: BlockRef::new(100),
            gas_used: 1,
            gas_price: 1,
        },
        events,
    }
}
