use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use rfid_evidence::chain::verify_ledger;
use rfid_evidence::harness::{run_scenario, suite};
use rfid_evidence::merkle;
use rfid_evidence_bench::{ledger, leaves};

fn merkle_build_and_prove(c: &mut Criterion) {
    let mut group = c.benchmark_group("merkle");
    for n in [16usize, 256, 4096] {
        let l = leaves(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("build", n), &l, |b, l| b.iter(|| merkle::build(black_box(l))));
        let tree = merkle::build(&l);
        let root = tree.root();
        group.bench_with_input(BenchmarkId::new("prove_verify", n), &n, |b, &n| {
            b.iter(|| {
                let i = n / 3;
                let p = tree.prove_index(i);
                assert!(merkle::verify_proof(&l[i], &p, &root));
            })
        });
    }
    group.finish();
}

fn ledger_verification(c: &mut Criterion) {
    let mut group = c.benchmark_group("ledger");
    for blocks in [50usize, 500] {
        let chain = ledger(blocks, 8);
        group.throughput(Throughput::Elements(blocks as u64));
        group.bench_with_input(BenchmarkId::new("verify", blocks), &chain, |b, chain| {
            b.iter(|| verify_ledger(black_box(chain), None).unwrap())
        });
    }
    group.finish();
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario");
    group.sample_size(20);
    for name in ["golden_path", "prop3_transcript", "prop4_evidence_service"] {
        let s = suite::find(name).unwrap();
        group.bench_function(name, |b| {
            b.iter_batched(|| s.clone(), |s| run_scenario(&s).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, merkle_build_and_prove, ledger_verification, scenarios);
criterion_main!(benches);
