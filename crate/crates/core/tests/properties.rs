use std::collections::BTreeSet;

use proptest::prelude::*;

use rarekg_core::diversity::SessionHistory;
use rarekg_core::eval::{score_predictions, Averaging, CasePrediction};
use rarekg_core::fallback::{FallbackResolver, PhenotypeLexicon};
use rarekg_core::matchers::{
    bigram_dice, term_match, Lexicon, MatchMethod, MatchScore, QueryTerm, Segmenter, SemanticUnit, UnitKind,
};
use rarekg_core::pipeline::{combine_scores, select_top_k};
use rarekg_core::sparsity::{adaptive_k, complexity, ComplexityWeights, OrganSystems, SparsityConfig};
use rarekg_core::text::{self, Stopwords};
use rarekg_core::{ConceptId, EngineConfig, KnowledgeGraph};

fn concept_id() -> impl Strategy<Value = ConceptId> {
    (1u32..60).prop_map(|n| format!("ORPHA:{n}").parse().unwrap())
}

fn id_set(max: usize) -> impl Strategy<Value = BTreeSet<ConceptId>> {
    prop::collection::btree_set(concept_id(), 0..max)
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            "muscle", "weakness", "of", "the", "heart", "failure", "Marfan", "syndrome", "ALS", "and", "seizures",
            "renal", "liver", "skin", ";", ".", "HP:0001250", "Ж", "é",
        ]),
        0..12,
    )
    .prop_map(|w| w.join(" "))
}

fn sparsity_config() -> impl Strategy<Value = SparsityConfig> {
    (1usize..10, 0usize..30, 0.0001f64..0.1).prop_map(|(lo, extra, a)| SparsityConfig::new(lo, lo + extra, a).unwrap())
}

proptest! {
    #[test]
    fn k_stays_in_bounds(cfg in sparsity_config(), n in 0usize..1_000_000, c in -1.0f64..2.0) {
        let k = adaptive_k(&cfg, n, c);
        prop_assert!(cfg.k_min() <= k && k <= cfg.k_max());
    }

    #[test]
    fn k_is_monotone(cfg in sparsity_config(), n in 0usize..100_000, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, extra in 0usize..50_000) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(adaptive_k(&cfg, n, lo) <= adaptive_k(&cfg, n, hi));
        prop_assert!(adaptive_k(&cfg, n, lo) <= adaptive_k(&cfg, n + extra, lo));
    }

    #[test]
    fn diversity_bounded_and_non_increasing(active in id_set(20), used in id_set(20), more in id_set(20)) {
        prop_assume!(!active.is_empty());
        let mut h = SessionHistory::default();
        h.record(&used);
        let before = h.diversity(&active).unwrap().score;
        prop_assert!((0.0..=1.0).contains(&before));
        h.record(&more);
        prop_assert!(h.diversity(&active).unwrap().score <= before);
    }

    #[test]
    fn adjustment_never_raises_and_keeps_order(lambda in 0.0f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0, used in any::<bool>()) {
        let mut h = SessionHistory::new(lambda).unwrap();
        let (x, y): (ConceptId, ConceptId) = ("ORPHA:1".parse().unwrap(), "ORPHA:2".parse().unwrap());
        if used {
            h.record(&[x.clone(), y.clone()]);
        }
        let (ax, ay) = (h.adjust_score(a, &x), h.adjust_score(b, &y));
        prop_assert!(ax <= a && ay <= b);
        if a < b { prop_assert!(ax <= ay); }
        let ratio_ok = |adj: f64, raw: f64| raw == 0.0 || adj == raw || adj == lambda * raw;
        prop_assert!(ratio_ok(ax, a));
    }

    #[test]
    fn dice_symmetric_in_range(a in "\\PC{0,16}", b in "\\PC{0,16}") {
        let x = bigram_dice(&a, &b);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, bigram_dice(&b, &a));
    }

    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,30}") {
        let once = text::normalize(&s);
        prop_assert_eq!(text::normalize(&once), once);
    }

    #[test]
    fn ids_round_trip(n in 0u32..10_000_000, ns in 0usize..4) {
        let raw = match ns {
            0 => format!("ORPHA:{n}"),
            1 => format!("OMIM:{:06}", n % 1_000_000),
            2 => format!("HP:{:07}", n),
            _ => format!("GENE:G{n}"),
        };
        let id: ConceptId = raw.parse().unwrap();
        prop_assert_eq!(id.to_string().parse::<ConceptId>().unwrap(), id);
    }

    #[test]
    fn segmentation_covers_tokens(s in words()) {
        let seg = Segmenter::new(
            ["muscle weakness", "heart failure", "marfan syndrome", "failure of the heart"].into_iter().collect::<Lexicon>(),
            Stopwords::default(),
        );
        let tokens = text::tokenize(&s);
        let units = seg.segment_tokens(&tokens);
        let joined: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
        prop_assert_eq!(joined.join(" "), tokens.join(" "));
    }

    #[test]
    fn term_quotient_in_range(ws in prop::collection::vec((words(), 0.01f64..1.0), 1..5), wt in prop::collection::vec((words(), 0.01f64..1.0), 1..5)) {
        let units = |v: &Vec<(String, f64)>| v.iter().map(|(t, w)| SemanticUnit { text: t.clone(), weight: *w, kind: UnitKind::Token }).collect::<Vec<_>>();
        let v = term_match(&units(&ws), &units(&wt)).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn complexity_is_weighted_sum(s in words(), raw in prop::array::uniform4(0.0f64..1.0)) {
        prop_assume!(raw.iter().sum::<f64>() > 1e-6);
        let w = ComplexityWeights::new(raw).unwrap();
        let q = QueryTerm::new(&s, "en", &Segmenter::default());
        let c = complexity(&q, &w, &OrganSystems::default());
        for f in c.factors() {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        let sum: f64 = w.get().iter().zip(c.factors()).map(|(b, f)| b * f).sum();
        prop_assert!((c.total - sum).abs() < 1e-12);
    }

    #[test]
    fn top_k_equals_full_sort(scores in prop::collection::vec(0u8..10, 0..80), k in 0usize..100) {
        let items: Vec<(usize, u8)> = scores.into_iter().enumerate().collect();
        let order = |a: &(usize, u8), b: &(usize, u8)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
        let mut full = items.clone();
        full.sort_by(order);
        full.truncate(k);
        prop_assert_eq!(select_top_k(items, k, order), full);
    }

    #[test]
    fn ablation_never_raises(values in prop::array::uniform4(0.0f64..=1.0), off in 0usize..4) {
        let raw: Vec<MatchScore> = MatchMethod::ALL.iter().zip(values).map(|(m, v)| MatchScore { value: v, method: *m, evidence: vec![] }).collect();
        let full = EngineConfig::default();
        let mut ablated = EngineConfig::default();
        ablated.switches.set(MatchMethod::ALL[off], false);
        let all = combine_scores(&raw, &full).unwrap();
        prop_assert!(combine_scores(&raw, &ablated).unwrap() <= all);
        prop_assert!((0.0..=1.0).contains(&all));
    }

    #[test]
    fn metrics_bounded_monotone_and_order_free(
        cases in prop::collection::vec((id_set(4), prop::collection::vec(concept_id(), 0..12)), 1..15),
        rotate in 0usize..15,
    ) {
        let preds: Vec<CasePrediction> = cases
            .into_iter()
            .enumerate()
            .filter(|(_, (g, _))| !g.is_empty())
            .map(|(i, (gold, predicted))| CasePrediction { case_id: format!("c{i}"), category: format!("k{}", i % 3), gold, predicted })
            .collect();
        prop_assume!(!preds.is_empty());
        let ns = [1, 3, 5, 10];
        let r = score_predictions(&preds, &ns, Averaging::Micro).unwrap();
        let m = &r.overall;
        for v in [m.precision, m.recall, m.accuracy].into_iter().chain(m.top_n_recall.values().copied()) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let tops: Vec<f64> = m.top_n_recall.values().copied().collect();
        prop_assert!(tops.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(m.accuracy, m.top_n_recall[&1]);
        prop_assert_eq!(r.per_category.values().map(|c| c.case_count).sum::<usize>(), m.case_count);
        let mut shuffled = preds.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rotate % len);
        prop_assert_eq!(score_predictions(&shuffled, &ns, Averaging::Micro).unwrap(), r);
    }

    #[test]
    fn fallback_sorted_bounded_deterministic(s in words(), weak in prop::collection::vec((0usize..3, 0.01f64..0.2), 0..3)) {
        let g = KnowledgeGraph::from_jsonl(include_str!("fixtures/three_concepts.jsonl")).unwrap();
        let ids: Vec<ConceptId> = g.concepts().iter().map(|c| c.primary_id.clone()).collect();
        let weak: Vec<(ConceptId, f64)> = weak.into_iter().map(|(i, s)| (ids[i].clone(), s)).collect();
        let pheno = PhenotypeLexicon::default();
        let stop = Stopwords::default();
        let r = FallbackResolver { graph: &g, phenotypes: &pheno, stopwords: &stop, basic_count: 3 };
        let q = QueryTerm::new(&s, "en", &Segmenter::default());
        let a = r.resolve(&q, &weak).unwrap();
        prop_assert_eq!(&a, &r.resolve(&q, &weak).unwrap());
        prop_assert!(!a.candidates.is_empty());
        for w in a.candidates.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].concept < w[1].concept));
        }
        prop_assert!(a.candidates.iter().all(|c| (0.0..=1.0).contains(&c.score)));
    }
}
