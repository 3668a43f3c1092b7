//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use poolsleuth::amm::scenarios::{
    detection_population, lifetime_population, onlyfans_case, random_rug_scenario, sniper_population, spammer_population,
    synthetic_chain,
};
use poolsleuth::amm::{math::proportional, run_scenario, units, PoolState, Scenario, Side, SimOutput};
use poolsleuth::analytics::{lifetime_shares, SubjectKind};
use poolsleuth::chain::{keccak_selector, signatures as sig, BlockRef, Bytes, ContractCreation, Hash32, Selector};
use poolsleuth::ingestion::write_fixture;
use poolsleuth::pipeline::{Datasets, Pipeline, PipelineConfig, SniperScope};
use poolsleuth::rugpull::{detect_exit_scam, Manipulation, Scope, DEFAULT_LP_BURN_THRESHOLD};
use poolsleuth::snipers::flag_snipers;
use poolsleuth::tokens::{assemble_dispatcher, build_token_dataset, StandardSpec};
use poolsleuth::{Address, Amount, SignedAmount};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Duration, limit: Duration) -> Result<(), String> {
    check(t < limit, format!("took {:.2?}, limit {:.0?}", t, limit))
}

fn analyze(s: &Scenario, cfg: PipelineConfig) -> Result<(SimOutput, Datasets), String> {
    let sim = run_scenario(s).map_err(|e| e.to_string())?;
    let (_, d) = Pipeline::in_memory(cfg, sim.fixture.clone()).run().map_err(|e| e.to_string())?;
    Ok((sim, d))
}

fn selectors() -> Outcome {
    let t = Instant::now();
    let table = [
        ("transfer(address,uint256)", "a9059cbb"),
        ("totalSupply()", "18160ddd"),
        ("balanceOf(address)", "70a08231"),
        ("transferFrom(address,address,uint256)", "23b872dd"),
        ("approve(address,uint256)", "095ea7b3"),
        ("allowance(address,address)", "dd62ed3e"),
        ("name()", "06fdde03"),
        ("symbol()", "95d89b41"),
        ("decimals()", "313ce567"),
    ];
    for (sig, want) in table {
        let got = keccak_selector(sig).to_hex();
        check(got == want, format!("{sig}: {got} != {want}"))?;
    }
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} selectors", table.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Token { optional: bool },
    Lp,
    NotToken,
}

fn token_corpus() -> Vec<(&'static str, Vec<u8>, StandardSpec, Label)> {
    let s = |l: &[&str]| -> Vec<Selector> { l.iter().map(|x| keccak_selector(x)).collect() };
    let erc_mandatory = [sig::TOTAL_SUPPLY, sig::BALANCE_OF, sig::TRANSFER, sig::TRANSFER_FROM, sig::APPROVE, sig::ALLOWANCE];
    let optional = [sig::NAME, sig::SYMBOL, sig::DECIMALS];
    let full: Vec<&str> = erc_mandatory.iter().chain(&optional).copied().collect();
    let erc = StandardSpec::erc20;
    let bep = StandardSpec::bep20;
    let mut out = vec![
        ("erc20 full", assemble_dispatcher(&s(&full)), erc(), Label::Token { optional: true }),
        ("erc20 mandatory only", assemble_dispatcher(&s(&erc_mandatory)), erc(), Label::Token { optional: false }),
    ];
    let names = ["no totalSupply", "no balanceOf", "no transfer", "no transferFrom", "no approve", "no allowance"];
    for (i, name) in names.into_iter().enumerate() {
        let mut l = full.clone();
        l.retain(|x| *x != erc_mandatory[i]);
        out.push((name, assemble_dispatcher(&s(&l)), erc(), Label::NotToken));
    }
    let drop = |x: &str| -> Vec<u8> { assemble_dispatcher(&s(&full.iter().copied().filter(|y| *y != x).collect::<Vec<_>>())) };
    out.push(("bep20 full", assemble_dispatcher(&s(&full)), bep(), Label::Token { optional: true }));
    out.push(("bep20 no symbol", drop(sig::SYMBOL), bep(), Label::Token { optional: false }));
    out.push(("bep20 no name", drop(sig::NAME), bep(), Label::NotToken));
    out.push(("bep20 no decimals", drop(sig::DECIMALS), bep(), Label::NotToken));
    let nft = s(&[
        "balanceOf(address)",
        "ownerOf(uint256)",
        "approve(address,uint256)",
        "getApproved(uint256)",
        "setApprovalForAll(address,bool)",
        "isApprovedForAll(address,address)",
        "transferFrom(address,address,uint256)",
        "safeTransferFrom(address,address,uint256)",
        "safeTransferFrom(address,address,uint256,bytes)",
        "name()",
        "symbol()",
        "tokenURI(uint256)",
    ]);
    out.push(("erc721-like", assemble_dispatcher(&nft), erc(), Label::NotToken));
    let multi = s(&[
        "balanceOf(address,uint256)",
        "balanceOfBatch(address[],uint256[])",
        "setApprovalForAll(address,bool)",
        "isApprovedForAll(address,address)",
        "safeTransferFrom(address,address,uint256,uint256,bytes)",
    ]);
    out.push(("erc1155-like", assemble_dispatcher(&multi), erc(), Label::NotToken));
    let mut pair: Vec<&str> = full.clone();
    pair.extend(["getReserves()", "token0()", "token1()", "mint(address)", "burn(address)", "swap(uint256,uint256,address,bytes)"]);
    out.push(("lp token", assemble_dispatcher(&s(&pair)), erc(), Label::Lp));
    let mut extra = full.clone();
    extra.extend(["owner()", "mint(address,uint256)", "renounceOwnership()"]);
    out.push(("erc20 with extras", assemble_dispatcher(&s(&extra)), erc(), Label::Token { optional: true }));
    // CBOR metadata trailer
    let mut meta = assemble_dispatcher(&s(&full));
    let cbor = [0xa2, 0x64, b'i', b'p', b'f', b's', 0x42, 0x12, 0x20, 0x64, b's', b'o', b'l', b'c', 0x43, 0, 8, 7];
    meta.extend_from_slice(&cbor);
    meta.extend_from_slice(&(cbor.len() as u16).to_be_bytes());
    out.push(("erc20 with metadata", meta, erc(), Label::Token { optional: true }));
    // transfer selector hidden in a PUSH32 operand is not dispatched
    let mut hidden = drop(sig::TRANSFER);
    let mut word = [0u8; 32];
    word[..4].copy_from_slice(&keccak_selector(sig::TRANSFER).0);
    hidden.push(0x7f);
    hidden.extend_from_slice(&word);
    hidden.push(0x50);
    out.push(("transfer only as data", hidden, erc(), Label::NotToken));
    out.push(("empty code", Vec::new(), erc(), Label::NotToken));
    // minimal delegating proxy
    let proxy = hex::decode("363d3d373d3d3d363d73bebebebebebebebebebebebebebebebebebebebe5af43d82803e903d91602b57fd5bf3").unwrap();
    out.push(("minimal proxy", proxy, erc(), Label::NotToken));
    out
}

fn token_identification() -> Outcome {
    let corpus = token_corpus();
    let mut errors = Vec::new();
    for (i, (name, code, spec, label)) in corpus.iter().enumerate() {
        let addr = Address::derive(&format!("corpus-{i}"));
        let creation = ContractCreation {
            contract: addr,
            deployer: Address::derive("deployer"),
            block: BlockRef::new(1),
            index: 0,
            tx_hash: Hash32::default(),
            via_internal: *label == Label::Lp,
            bytecode: Bytes(code.clone()),
            gas_used: 1,
            gas_price: 1,
            metadata: None,
        };
        let pools: HashSet<Address> = if *label == Label::Lp { [addr].into() } else { HashSet::new() };
        let ds = build_token_dataset(&[creation], &[], spec, &pools);
        let got = match ds.tokens.first() {
            None => Label::NotToken,
            Some(t) if t.is_lp_token => Label::Lp,
            Some(t) => Label::Token { optional: t.implements_optional },
        };
        if got != *label {
            errors.push(format!("{name}: {got:?} != {label:?}"));
        }
    }
    check(corpus.len() == 20, format!("corpus has {} fixtures", corpus.len()))?;
    check(errors.is_empty(), errors.join("; "))?;
    Ok(format!("{} fixtures, 0 errors", corpus.len()))
}

fn amm_invariants() -> Outcome {
    const N: usize = 100_000;
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let amount = |rng: &mut ChaCha8Rng| {
        let shift = rng.gen_range(8..100);
        Amount::from(rng.gen_range(1u128..=u128::MAX >> shift))
    };
    let mut zero = PoolState::new(0).unwrap().add_liquidity(&units("1000", 18), &units("3000000", 18)).unwrap().state;
    let mut fee = PoolState::new(30).unwrap().add_liquidity(&units("1000", 18), &units("3000000", 18)).unwrap().state;
    let (mut zero_swaps, mut fee_swaps) = (0, 0);
    for i in 0..N {
        let side = if rng.gen_bool(0.5) { Side::Token0In } else { Side::Token1In };
        let a = amount(&mut rng);
        let x = match side {
            Side::Token0In => zero.reserve0.as_big().clone(),
            Side::Token1In => zero.reserve1.as_big().clone(),
        };
        if let Ok(out) = zero.swap_exact_in(&a, side) {
            let (before, after) = (zero.product(), out.state.product());
            check(after >= before && &after - &before < &x + a.as_big(), format!("zero-fee swap {i} leaves the bound"))?;
            zero = out.state;
            zero_swaps += 1;
        }
        let a = amount(&mut rng);
        if let Ok(out) = fee.swap_exact_in(&a, side) {
            check(out.state.product() > fee.product(), format!("fee swap {i} did not grow the product"))?;
            fee = out.state;
            fee_swaps += 1;
        }
        if i % 4 == 0 {
            let p = if rng.gen_bool(0.5) { &zero } else { &fee };
            let a0 = Amount::from(rng.gen_range(1u128..=1u128 << 96));
            let a1 = Amount::from_big(proportional(a0.as_big(), p.reserve0.as_big(), p.reserve1.as_big()));
            if let Ok(add) = p.add_liquidity(&a0, &a1) {
                let rem = add.state.remove_liquidity(&add.lp_minted).map_err(|e| e.to_string())?;
                check(rem.amount0 <= a0 && rem.amount1 <= a1, format!("add/remove {i} profited"))?;
            }
        }
    }
    check(zero_swaps > N / 2 && fee_swaps > N / 2, format!("only {zero_swaps}/{fee_swaps} swaps executed"))?;
    within(t.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{zero_swaps} zero-fee, {fee_swaps} fee swaps"))
}

fn onlyfans() -> Outcome {
    let t = Instant::now();
    let cfg = PipelineConfig { scope: Scope::OneDay, ..PipelineConfig::default() };
    let (sim, d) = analyze(&onlyfans_case(), cfg)?;
    check(d.rugpulls.reports.len() == 1, "not detected")?;
    let r = &d.rugpulls.reports[0];
    check(r.pool == sim.pool("OnlyFans/WBNB"), "wrong pool")?;
    check(r.manipulation == Manipulation::None, format!("manipulation {:?}", r.manipulation))?;
    check(r.delta_b == units("2.67", 18).to_signed(), format!("delta_b {}", r.delta_b))?;
    check(r.fees_base < units("2.67", 18), "fees exceed the gain")?;
    check(r.successful, "not successful")?;
    within(t.elapsed(), Duration::from_secs(5))?;
    Ok(format!("delta_b {} wei, net {} wei", r.delta_b, r.net_gain))
}

fn gain_oracle() -> Outcome {
    const SEEDS: u64 = 1_000;
    let t = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).stack_size(16 << 20).build().map_err(|e| e.to_string())?;
    let results: Vec<Result<Manipulation, String>> = pool.install(|| {
        (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let (s, truth) = random_rug_scenario(seed);
            let cfg = PipelineConfig { scope: Scope::All, workers: 1, ..PipelineConfig::default() };
            let (sim, d) = analyze(&s, cfg)?;
            let [r] = d.rugpulls.reports.as_slice() else {
                return Err(format!("seed {seed}: {} reports", d.rugpulls.reports.len()));
            };
            let op = sim.actor(&truth.operator);
            let want: SignedAmount = sim.ledger.pool_flow(op, sim.pool(&truth.pool), sim.token("WBNB")) - &sim.ledger.gas_of(op);
            check(r.net_gain == want, format!("seed {seed}: {} != {}", r.net_gain, want))?;
            check(r.manipulation == truth.manipulation, format!("seed {seed}: style"))?;
            Ok(truth.manipulation)
        })
        .collect()
    });
    let mut styles = BTreeSet::new();
    for r in results {
        styles.insert(r?);
    }
    check(styles.len() == 4, format!("only {} operator styles", styles.len()))?;
    within(t.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{SEEDS}/{SEEDS} exact"))
}

fn detection() -> Outcome {
    let (s, truth) = detection_population(42, 300, 200);
    let cfg = PipelineConfig { scope: Scope::All, ..PipelineConfig::default() };
    let (sim, d) = analyze(&s, cfg)?;
    check(d.timelines.timelines.len() == 500, format!("{} pools", d.timelines.timelines.len()))?;
    let mut detected = BTreeSet::new();
    for t in d.timelines.timelines.values() {
        if detect_exit_scam(t, DEFAULT_LP_BURN_THRESHOLD).map_err(|e| e.to_string())?.is_some() {
            detected.insert(t.record.pool);
        }
    }
    let actual: BTreeSet<Address> = truth.iter().filter(|(_, is)| **is).map(|(p, _)| sim.pool(p)).collect();
    let tp = detected.intersection(&actual).count() as f64;
    let precision = tp / detected.len() as f64;
    let recall = tp / actual.len() as f64;
    check(precision == 1.0 && recall == 1.0, format!("precision {precision}, recall {recall}"))?;
    Ok(format!("precision {precision:.3}, recall {recall:.3}"))
}

fn snipers() -> Outcome {
    let (s, truth) = sniper_population(11);
    let cfg = PipelineConfig {
        scope: Scope::All,
        sniper_scope: SniperScope::ExitScam,
        sniper_delay: Some(5),
        sniper_pools: Some(100),
        ..PipelineConfig::default()
    };
    let (sim, d) = analyze(&s, cfg)?;
    let verdicts = flag_snipers(&d.latencies, 5, 100).map_err(|e| e.to_string())?;
    check(verdicts.len() == 505, format!("{} traders", verdicts.len()))?;
    let flagged: BTreeSet<Address> = verdicts.iter().filter(|v| v.flagged).map(|v| v.trader).collect();
    let bots: BTreeSet<Address> = truth.bots.iter().map(|b| sim.actor(b)).collect();
    check(flagged == bots, format!("{} flagged, want the {} bots", flagged.len(), bots.len()))?;
    let st = &d.sniper_stats;
    let same = format!("{:.3}", st.same_block_share);
    let cover = format!("{:.3}", st.pool_coverage);
    check(same == "0.310", format!("same-block share {same}"))?;
    check(cover == "0.865", format!("pool coverage {cover}"))?;
    Ok(format!("{} bots, same-block {same}, coverage {cover}", flagged.len()))
}

fn spammers() -> Outcome {
    let (s, truth) = spammer_population(5);
    let (sim, d) = analyze(&s, PipelineConfig::default())?;
    let sp = d.spammers.as_ref().ok_or("no creator statistics")?;
    check((sp.spammer_share - 0.243).abs() <= 0.001, format!("share {}", sp.spammer_share))?;
    let flagged: BTreeSet<Address> = d.creators.iter().filter(|c| c.is_spammer).map(|c| c.creator).collect();
    let want: BTreeSet<Address> = truth.iter().map(|c| sim.actor(c)).collect();
    check(flagged == want, format!("{} flagged, want {}", flagged.len(), want.len()))?;
    Ok(format!("{} of {} creators, share {:.4}", sp.spammers, sp.creators, sp.spammer_share))
}

fn lifetimes() -> Outcome {
    let s = lifetime_population(9, 155, 437, 408);
    let (_, d) = analyze(&s, PipelineConfig::default())?;
    let sh = lifetime_shares(&d.lifetimes, SubjectKind::Token);
    check(sh.total == 1000, format!("{} tokens", sh.total))?;
    check(sh.one_block == 155 && sh.one_block_share == 0.155, format!("one-block {}", sh.one_block_share))?;
    check(sh.one_day == 592 && sh.one_day_share == 0.592, format!("one-day {}", sh.one_day_share))?;
    Ok(format!("one-block {:.3}, one-day {:.3}", sh.one_block_share, sh.one_day_share))
}

/// Throughput and determinism share one synthetic fixture.
fn full_runs() -> (Outcome, Outcome) {
    let prepared = (|| -> Result<(tempfile::TempDir, usize), String> {
        let sim = run_scenario(&synthetic_chain(1, 1_010_000)).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_fixture(&dir.path().join("chain.jsonl"), &sim.fixture.profile, &sim.fixture.records).map_err(|e| e.to_string())?;
        Ok((dir, sim.fixture.records.len()))
    })();
    let (dir, records) = match prepared {
        Ok(p) => p,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let run = |name: &str| -> Result<(poolsleuth::RunManifest, Duration), String> {
        let cfg = PipelineConfig {
            inputs: vec![dir.path().join("chain.jsonl")],
            out_dir: dir.path().join(name),
            workers: 8,
            ..PipelineConfig::default()
        };
        let t = Instant::now();
        let m = poolsleuth::run_pipeline(cfg).map_err(|e| e.to_string())?;
        Ok((m, t.elapsed()))
    };
    let first = run("a");
    let throughput = first.as_ref().map_err(Clone::clone).and_then(|(_, t)| {
        check(records >= 1_000_000, format!("fixture has {records} records"))?;
        within(*t, Duration::from_secs(60))?;
        Ok(format!("{records} records in {t:.2?}, 8 workers"))
    });
    let determinism = first.and_then(|(a, _)| {
        let (b, _) = run("b")?;
        check(!a.outputs.is_empty(), "no outputs")?;
        check(a.outputs == b.outputs, "output hashes differ between runs")?;
        Ok(format!("{} outputs identical", a.outputs.len()))
    });
    (throughput, determinism)
}

fn main() {
    let mut rows: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut run = |name: &'static str, f: fn() -> Outcome| {
        let t = Instant::now();
        let r = f();
        rows.push((name, r, t.elapsed()));
        let (name, r, t) = rows.last().unwrap();
        report(name, r, *t);
    };
    run("selector table fidelity", selectors);
    run("token identification corpus", token_identification);
    run("amm invariants", amm_invariants);
    run("onlyfans case replay", onlyfans);
    run("gain formula oracle", gain_oracle);
    run("detection precision/recall", detection);
    run("sniper detection", snipers);
    run("spammer statistics", spammers);
    run("lifetime classes", lifetimes);
    let t = Instant::now();
    let (throughput, determinism) = full_runs();
    let t = t.elapsed();
    report("throughput", &throughput, t);
    report("determinism", &determinism, t);
    rows.push(("throughput", throughput, t));
    rows.push(("determinism", determinism, t));
    let failed = rows.iter().filter(|(_, r, _)| r.is_err()).count();
    println!("{} criteria, {} passed, {} failed", rows.len(), rows.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(name: &str, r: &Outcome, t: Duration) {
    match r {
        Ok(detail) => println!("PASS  {name:<30} {t:>10.2?}  {detail}"),
        Err(why) => println!("FAIL  {name:<30} {t:>10.2?}  {why}"),
    }
}
