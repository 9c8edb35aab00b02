use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dtgspl_bench::{random_costs, scored_intervals};
use dtgspl_core::dmr::linear_assignment;
use dtgspl_core::lattice::build_lattice;
use dtgspl_core::temporal::{iou, nms};
use std::hint::black_box;

fn lattice(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_lattice");
    for n in [16, 32, 64] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| build_lattice(black_box(n), 16).unwrap())
        });
    }
    g.finish();
}

fn suppression(c: &mut Criterion) {
    let items = scored_intervals(136, 1);
    c.bench_function("iou_all_pairs_136", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for (x, _) in &items {
                for (y, _) in &items {
                    acc += iou(x, y);
                }
            }
            acc
        })
    });
    c.bench_function("nms_136", |b| b.iter(|| nms(black_box(&items), 0.5)));
}

fn assignment(c: &mut Criterion) {
    let mut g = c.benchmark_group("linear_assignment");
    for n in [4, 16, 64] {
        let cost = random_costs(n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, cost| {
            b.iter(|| linear_assignment(black_box(cost)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lattice, suppression, assignment);
criterion_main!(benches);
