use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mnemo_bench::{graph_fixture, interval_fixture, visual_fixture};
use mnemo_core::graph::PprParams;
use mnemo_core::temporal::tiou;

fn bench_ppr(c: &mut Criterion) {
    let mut group = c.benchmark_group("ppr");
    for (nodes, edges) in [(100, 300), (500, 1_500), (2_000, 6_000)] {
        let (graph, seeds) = graph_fixture(nodes, edges, 7);
        let params = PprParams::default();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{nodes}n_{edges}e")),
            &(graph, seeds),
            |b, (graph, seeds)| b.iter(|| graph.ppr(seeds, &params).unwrap()),
        );
    }
    group.finish();
}

fn bench_edge_ranking(c: &mut Criterion) {
    let (graph, seeds) = graph_fixture(500, 1_500, 11);
    let scores = graph.ppr(&seeds, &PprParams::default()).unwrap().scores;
    c.bench_function("edge_scores_1500e", |b| {
        b.iter(|| graph.edge_scores(&scores).unwrap())
    });
}

fn bench_feature_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("feature_search");
    for entries in [1_000usize, 10_000] {
        let (memory, query) = visual_fixture(entries, 64, 13);
        group.bench_with_input(
            BenchmarkId::from_parameter(entries),
            &(memory, query),
            |b, (memory, query)| b.iter(|| memory.feature_search(query, 20).unwrap()),
        );
    }
    group.finish();
}

fn bench_tiou(c: &mut Criterion) {
    let (retrieved, truth) = interval_fixture(1_000, 1_000_000, 17);
    c.bench_function("tiou_1000x1000", |b| {
        b.iter(|| tiou(&retrieved, &truth).unwrap())
    });
}

criterion_group!(
    benches,
    bench_ppr,
    bench_edge_ranking,
    bench_feature_search,
    bench_tiou
);
criterion_main!(benches);
