use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use std::hint::black_box;

use poolsleuth::ingestion::read_fixture_str;
use poolsleuth::pipeline::{Pipeline, PipelineConfig};
use poolsleuth::rugpull::{detect_exit_scam, DEFAULT_LP_BURN_THRESHOLD};
use poolsleuth::tokens::extract_selectors;
use poolsleuth_bench::{bytecodes, fixture_text, swap_inputs, synthetic_fixture, timelines};

fn swaps(c: &mut Criterion) {
    let (pool, swaps) = swap_inputs(1_000, 1);
    let mut g = c.benchmark_group("amm");
    g.throughput(Throughput::Elements(swaps.len() as u64));
    g.bench_function("swap_exact_in x1000", |b| {
        b.iter(|| {
            let mut p = pool.clone();
            for (a, side) in &swaps {
                if let Ok(out) = p.swap_exact_in(a, *side) {
                    p = out.state;
                }
            }
            black_box(p)
        })
    });
    g.finish();
}

fn selectors(c: &mut Criterion) {
    let codes = bytecodes(200);
    let bytes: usize = codes.iter().map(Vec::len).sum();
    let mut g = c.benchmark_group("tokens");
    g.throughput(Throughput::Bytes(bytes as u64));
    g.bench_function("extract_selectors x200", |b| {
        b.iter(|| codes.iter().map(|c| extract_selectors(black_box(c)).len()).sum::<usize>())
    });
    g.finish();
}

fn fixture_parse(c: &mut Criterion) {
    let text = fixture_text(20_000, 2);
    let mut g = c.benchmark_group("ingestion");
    g.throughput(Throughput::Bytes(text.len() as u64));
    g.sample_size(20);
    g.bench_function("read_fixture_str 20k", |b| b.iter(|| read_fixture_str(black_box(&text)).unwrap().records.len()));
    g.finish();
}

fn detection(c: &mut Criterion) {
    let tl = timelines(3, 300, 200);
    let mut g = c.benchmark_group("rugpull");
    g.throughput(Throughput::Elements(tl.len() as u64));
    g.bench_function("detect_exit_scam x500", |b| {
        b.iter(|| tl.values().filter(|t| detect_exit_scam(t, DEFAULT_LP_BURN_THRESHOLD).unwrap().is_some()).count())
    });
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let fixture = synthetic_fixture(50_000, 4);
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.throughput(Throughput::Elements(fixture.records.len() as u64));
    for workers in [1, 4, 8] {
        g.bench_function(format!("in_memory 50k, {workers} workers"), |b| {
            b.iter_batched(
                || fixture.clone(),
                |f| {
                    let cfg = PipelineConfig { workers, ..PipelineConfig::default() };
                    Pipeline::in_memory(cfg, f).run().unwrap().1.rugpulls.reports.len()
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, swaps, selectors, fixture_parse, detection, pipeline);
criterion_main!(benches);
