use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rarekg_core::synthetic::{generate, SyntheticSpec};
use rarekg_core::{Engine, EngineConfig, KnowledgeGraph};

fn spec(concepts: usize) -> SyntheticSpec {
    SyntheticSpec {
        concepts,
        roots: 5,
        families_per_root: 4,
        seed: 11,
    }
}

fn load(c: &mut Criterion) {
    let mut group = c.benchmark_group("load");
    for n in [500, 5000] {
        let s = generate(&spec(n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &s.jsonl, |b, src| {
            b.iter(|| KnowledgeGraph::from_jsonl(black_box(src)).unwrap())
        });
    }
    group.finish();
}

fn activate(c: &mut Criterion) {
    let mut group = c.benchmark_group("activate");
    for n in [500, 5000] {
        let s = generate(&spec(n));
        let engine = Engine::new(KnowledgeGraph::from_jsonl(&s.jsonl).unwrap(), EngineConfig::default()).unwrap();
        let queries = [
            ("code", s.concepts[n / 2].omim.clone()),
            ("alias", s.concepts[n / 3].aliases[0].clone()),
            ("narrative", format!("{} with recurrent seizures and hearing loss", s.concepts[7].name)),
            ("fallback", "qqxv zzkw".to_string()),
        ];
        for (label, q) in queries {
            group.bench_with_input(BenchmarkId::new(label, n), &q, |b, q| {
                b.iter(|| {
                    let mut session = engine.new_session();
                    engine.activate(black_box(q), "en", &mut session).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, load, activate);
criterion_main!(benches);
