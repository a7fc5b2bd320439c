use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rarekg_core::matchers::{
    bigram_dice, char_similarity, semantic_similarity, translit_similarity, Lexicon, MatchMethod, Matchers, Segmenter,
};
use rarekg_core::synthetic::{generate, SyntheticSpec};
use rarekg_core::text::Stopwords;
use rarekg_core::KnowledgeGraph;

fn primitives(c: &mut Criterion) {
    let (a, b) = ("Anderson-Fabry disease", "maladie de Fabry");
    c.bench_function("bigram_dice", |x| x.iter(|| bigram_dice(black_box(a), black_box(b))));
    c.bench_function("char_similarity", |x| x.iter(|| char_similarity(black_box(a), black_box(b))));
    c.bench_function("semantic_similarity", |x| x.iter(|| semantic_similarity(black_box(a), black_box(b))));
    c.bench_function("translit_similarity", |x| {
        x.iter(|| translit_similarity(black_box("болезнь Фабри"), black_box(b)))
    });
}

fn per_method(c: &mut Criterion) {
    let s = generate(&SyntheticSpec::default());
    let g = KnowledgeGraph::from_jsonl(&s.jsonl).unwrap();
    let lexicon: Lexicon = g.normalized_names().collect();
    let m = Matchers::new(Segmenter::new(lexicon, Stopwords::default()));
    let q = m.query(&format!("{} with renal failure", s.concepts[4].aliases[0]), "en");
    let target = &g.concepts()[4];
    for method in MatchMethod::ALL {
        c.bench_function(&format!("match/{method}"), |x| x.iter(|| m.run(method, black_box(&q), target)));
    }
}

criterion_group!(benches, primitives, per_method);
criterion_main!(benches);
