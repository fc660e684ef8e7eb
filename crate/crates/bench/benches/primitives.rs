//! Microbenchmarks for the hot paths: pad application, record-store
//! randomization, the query scanner, and the end-to-end analysis of a
//! generated program.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use randlab_core::builtins::BuiltinSet;
use randlab_core::dataflow;
use randlab_core::minilang::parse;
use randlab_core::pad::{RecordStore, Scheme, Table};
use randlab_core::progen;
use randlab_core::scan::scan;
use randlab_core::sql;
use randlab_core::tcs::TrustedSpec;

fn bench_pad(c: &mut Criterion) {
    let mut group = c.benchmark_group("pad");
    for k in [1usize, 2, 4, 8] {
        let scheme = Scheme::printable(k);
        let table = Table::from_seed(&scheme, 7).unwrap();
        let input = b"wget http-archive-restore";
        group.bench_with_input(BenchmarkId::new("apply", k), &k, |b, _| {
            b.iter(|| black_box(table.apply(black_box(input))))
        });
        let randomized = table.apply(input);
        group.bench_with_input(BenchmarkId::new("reverse_apply", k), &k, |b, _| {
            b.iter(|| black_box(table.reverse_apply(black_box(&randomized))))
        });
        group.bench_with_input(BenchmarkId::new("table_generation", k), &k, |b, _| {
            let mut seed = 0u64;
            b.iter(|| {
                seed += 1;
                black_box(Table::from_seed(&scheme, seed).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_store(c: &mut Criterion) {
    c.bench_function("store/randomize_consume", |b| {
        let scheme = Scheme::printable(1);
        let mut store = RecordStore::seeded(1);
        b.iter(|| {
            let record = store.randomize(b"wget", &scheme).unwrap();
            store.consume(black_box(&record.randomized));
        })
    });
}

fn bench_scanner(c: &mut Criterion) {
    let query = b"select u.name, o.total from users u, orders o \
                  where u.id = o.user_id and u.name = 'it''s fine' \
                  and o.total # 3 /*! straight_join */ -- tail"
        .repeat(8);
    c.bench_function("scan/8x_query", |b| {
        b.iter(|| black_box(scan(black_box(&query))))
    });
}

fn bench_sql_pipeline(c: &mut Criterion) {
    c.bench_function("sql/randomize_and_hook", |b| {
        let engine = sql::MinimalEngine::new(["users", "id", "name"].map(str::to_owned));
        let scheme = Scheme::word_safe(2);
        b.iter(|| {
            let mut store = RecordStore::seeded(3);
            let table = store.draw_table(&scheme).unwrap();
            let fragment =
                sql::randomize_fragment(b"select name from users where id='7'", &mut store, &table)
                    .unwrap();
            black_box(sql::sink_hook(&fragment, &mut store, &table, &engine))
        })
    });
}

fn bench_analysis(c: &mut Criterion) {
    let generated = progen::generate(12);
    let program = parse(&generated.source, "gen.mpl").unwrap();
    let spec =
        TrustedSpec::parse(&generated.spec_text, std::path::Path::new("."), "gen.tcs").unwrap();
    let builtins = BuiltinSet::default();
    c.bench_function("dataflow/analyze_generated", |b| {
        b.iter(|| black_box(dataflow::analyze(&program, &spec, &builtins)))
    });
}

criterion_group!(
    benches,
    bench_pad,
    bench_store,
    bench_scanner,
    bench_sql_pipeline,
    bench_analysis
);
criterion_main!(benches);
