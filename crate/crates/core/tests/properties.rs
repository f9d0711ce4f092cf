mod common;

use proptest::prelude::*;

use cellac_core::candidates::{merge_candidates, Candidate, CandidateValue, KbEvidence, TcEvidence};
use cellac_core::eval::{cell_scores, ndcg_at_k};
use cellac_core::forest::{fit, FeatureSchema, FeatureVector, ForestParams};
use cellac_core::matching::{
    complement_scores, extract_match_features, infogather_similarities, related_data_sim, related_heading_sim,
    MatchSettings, TableProfile,
};
use cellac_core::similarity::{edit_sim, max_weight_matching, TermVector};
use cellac_core::stats::HeadingStats;
use cellac_core::types::{normalize, values_equal, NormalizedValue, ValueType};

use common::*;

fn value(i: u8) -> Candidate {
    if i == 0 {
        Candidate::Empty
    } else {
        Candidate::Value(NormalizedValue::text(ValueType::String, &format!("v{i}")))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn edit_sim_is_a_bounded_symmetric_similarity(a in "[a-e ]{0,12}", b in "[a-e ]{0,12}") {
        let s = edit_sim(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, edit_sim(&b, &a));
        prop_assert_eq!(edit_sim(&a, &a), 1.0);
    }

    #[test]
    fn cosine_is_bounded_and_symmetric(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
        let (x, y) = (TermVector::tf(&a), TermVector::tf(&b));
        let c = x.cosine(&y);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        prop_assert!((c - y.cosine(&x)).abs() < 1e-12);
    }

    #[test]
    fn matching_beats_any_single_edge(w in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..6), 1..6)) {
        let cols = w[0].len();
        let w: Vec<Vec<f64>> = w.into_iter().map(|mut r| { r.resize(cols, 0.0); r }).collect();
        let (total, _) = max_weight_matching(&w);
        let best_edge = w.iter().flatten().copied().fold(0.0, f64::max);
        prop_assert!(total + 1e-12 >= best_edge);
        prop_assert!((total - exhaustive_matching(&w)).abs() < 1e-9);
    }

    #[test]
    fn heading_statistics_are_symmetric_distributions(seed in 0u64..10_000) {
        let (corpus, triples) = random_world(seed);
        let stats = HeadingStats::build(&corpus, &kb_of(&triples));
        for (h, inner) in stats.h2h_counts() {
            let mut total = 0.0;
            for (h2, n) in inner {
                prop_assert_eq!(stats.n_hh(h, h2), *n, "n({}, {}) not symmetric", h2, h);
                total += stats.p_h2h(h2, h);
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert_eq!(stats.h2h_total(h), inner.values().sum::<u64>());
        }
        for (h, inner) in stats.h2p_counts() {
            let total: f64 = inner.keys().map(|p| stats.p_p2h(p, h)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(stats.p_h2h("never seen", "nor this"), 0.0);
    }

    #[test]
    fn statistics_survive_a_tsv_round_trip(seed in 0u64..10_000) {
        let (corpus, triples) = random_world(seed);
        let stats = HeadingStats::build(&corpus, &kb_of(&triples));
        let back = HeadingStats::from_tsv(&stats.h2h_tsv(), &stats.h2p_tsv()).unwrap();
        prop_assert_eq!(back, stats);
    }

    #[test]
    fn table_similarities_are_symmetric(seed in 0u64..10_000) {
        let (corpus, _) = random_world(seed);
        let tables = corpus.tables();
        let settings = MatchSettings::default();
        for a in tables.iter().take(4) {
            for b in tables.iter().take(4) {
                let (pa, pb) = (TableProfile::new(a), TableProfile::new(b));
                let ab = infogather_similarities(&pa, &pb, None);
                let ba = infogather_similarities(&pb, &pa, None);
                for (x, y) in ab.iter().zip(&ba) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                prop_assert!((related_heading_sim(&pa, &pb) - related_heading_sim(&pb, &pa)).abs() < 1e-12);
                prop_assert!((related_data_sim(&pa, &pb) - related_data_sim(&pb, &pa)).abs() < 1e-12);
                let (_, o1, r1) = complement_scores(&pa, &pb, &corpus);
                let (_, o2, r2) = complement_scores(&pb, &pa, &corpus);
                prop_assert!((o1 - o2).abs() < 1e-12);
                prop_assert!((r1 - r2).abs() < 1e-12);
                let f = extract_match_features(&pa, &pb, None, &corpus, &settings);
                let g = extract_match_features(&pb, &pa, None, &corpus, &settings);
                prop_assert!((f.msje - g.msje).abs() < 1e-12);
                prop_assert!(f.values().iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn self_match_dominates_a_disjoint_table(seed in 0u64..10_000) {
        let (corpus, _) = random_world(seed);
        let t = &corpus.tables()[0];
        let other = cellac_core::table::Table::from_record(cellac_core::table::TableRecord {
            id: "zz".into(),
            page_title: "unrelated".into(),
            caption: String::new(),
            headings: vec!["qq".into(), "ww".into()],
            rows: vec![vec![
                cellac_core::table::CellRecord::entity("Q", "q:q"),
                cellac_core::table::CellRecord::text("zzz"),
            ]],
            meta: None,
        }).unwrap();
        let settings = MatchSettings::default();
        let p = TableProfile::new(t);
        let same = extract_match_features(&p, &p, None, &corpus, &settings);
        let diff = extract_match_features(&p, &TableProfile::new(&other), None, &corpus, &settings);
        for (i, (a, b)) in same.infogather.iter().zip(&diff.infogather).enumerate() {
            prop_assert!(a >= b, "infogather element {}", i);
        }
        prop_assert!(same.msje >= diff.msje);
        prop_assert!(same.heading_sim >= diff.heading_sim);
        prop_assert!(same.data_sim >= diff.data_sim);
        prop_assert!(same.entity_overlap >= diff.entity_overlap);
        prop_assert!(same.entity_relatedness >= diff.entity_relatedness);
    }

    #[test]
    fn merging_never_loses_evidence(items in prop::collection::vec((0u8..6, any::<bool>()), 0..30)) {
        let cands: Vec<CandidateValue> = items
            .iter()
            .enumerate()
            .filter(|(_, (v, _))| *v != 0)
            .map(|(i, (v, kb))| {
                let mut c = CandidateValue { value: value(*v), tc: vec![], kb: vec![] };
                if *kb {
                    c.kb.push(KbEvidence { predicate: format!("p{i}"), label: "l".into(), object: "o".into(), mapped: true });
                } else {
                    c.tc.push(TcEvidence { table: i as u32, table_id: format!("t{i}"), heading: "h".into(), row: 0, col: 1, raw: "x".into() });
                }
                c
            })
            .collect();
        let before: usize = cands.iter().map(CandidateValue::evidence_count).sum();
        let merged = merge_candidates(cands);
        let after: usize = merged.iter().map(CandidateValue::evidence_count).sum();
        prop_assert_eq!(before, after);
        for (i, a) in merged.iter().enumerate() {
            prop_assert!(a.evidence_count() >= 1);
            for b in &merged[i + 1..] {
                prop_assert!(!a.value.matches(&b.value));
            }
        }
    }

    #[test]
    fn ndcg_is_bounded_and_perfect_rankings_score_one(
        ranking in prop::collection::vec(0u8..8, 0..12),
        truth in prop::collection::vec(0u8..8, 1..4),
        k in 1usize..12,
    ) {
        let ranking: Vec<Candidate> = ranking.into_iter().map(value).collect();
        let truth: Vec<Candidate> = truth.into_iter().map(value).collect();
        let s = ndcg_at_k(&ranking, &truth, k).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
        let mut perfect: Vec<Candidate> = Vec::new();
        for t in &truth {
            if !perfect.iter().any(|p| p.matches(t)) {
                perfect.push(t.clone());
            }
        }
        perfect.extend(ranking.iter().cloned());
        prop_assert!((ndcg_at_k(&perfect, &truth, k).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_excluded_equals_included_on_filtered_runs(
        ranking in prop::collection::vec(0u8..6, 0..10),
        truth in prop::collection::vec(0u8..6, 1..3),
    ) {
        let ranking: Vec<Candidate> = ranking.into_iter().map(value).collect();
        let truth: Vec<Candidate> = truth.into_iter().map(value).collect();
        let (_, excl) = cell_scores(&ranking, &truth).unwrap();
        let ne_truth: Vec<Candidate> = truth.iter().filter(|t| !t.is_empty()).cloned().collect();
        match excl {
            None => prop_assert!(ne_truth.is_empty()),
            Some([e5, e10]) => {
                let filtered: Vec<Candidate> = ranking.iter().filter(|c| !c.is_empty()).cloned().collect();
                prop_assert_eq!(e5, ndcg_at_k(&filtered, &ne_truth, 5).unwrap());
                prop_assert_eq!(e10, ndcg_at_k(&filtered, &ne_truth, 10).unwrap());
            }
        }
    }

    #[test]
    fn ndcg_ignores_order_below_k(tail in prop::collection::vec(0u8..6, 0..6)) {
        let truth = vec![value(1)];
        let mut a = vec![value(2), value(3), value(1)];
        a.extend(tail.iter().copied().map(value));
        let mut b = a.clone();
        b[3..].reverse();
        prop_assert_eq!(ndcg_at_k(&a, &truth, 3).unwrap(), ndcg_at_k(&b, &truth, 3).unwrap());
    }

    #[test]
    fn normalization_is_idempotent(
        n in -100_000i64..100_000,
        unit in "(m|kg|km2|)",
        y in 1000i32..2100,
        m in 1u32..13,
        d in 1u32..29,
    ) {
        let q = normalize(&format!("{n} {unit}"), ValueType::Quantity);
        let again = normalize(&q.canonical.to_string(), ValueType::Quantity);
        prop_assert!(values_equal(&q, &again));
        let date = normalize(&format!("{y:04}-{m:02}-{d:02}"), ValueType::DateTime);
        let again = normalize(&date.canonical.to_string(), ValueType::DateTime);
        prop_assert!(values_equal(&date, &again));
        prop_assert!(values_equal(&date, &date));
    }

    #[test]
    fn forest_predictions_stay_within_targets(
        ys in prop::collection::vec(-5.0f64..5.0, 4..40),
        seed in 0u64..100,
    ) {
        let schema = FeatureSchema::new(["a", "b"]);
        let data: Vec<(FeatureVector, f64)> = ys
            .iter()
            .enumerate()
            .map(|(i, y)| (FeatureVector::new(schema.clone(), vec![i as f64, (i % 3) as f64]).unwrap(), *y))
            .collect();
        let model = fit(&data, &ForestParams { n_trees: 8, seed, ..Default::default() }).unwrap();
        let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(l, h), y| (l.min(*y), h.max(*y)));
        for (x, _) in &data {
            let p = model.predict(x).unwrap();
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
        let imp = model.importance();
        let total: f64 = imp.iter().map(|(_, v)| v).sum();
        prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn constant_feature_does_not_change_predictions() {
    let s2 = FeatureSchema::new(["a", "b"]);
    let s3 = FeatureSchema::new(["a", "b", "c"]);
    let ys: Vec<f64> = (0..30).map(|i| ((i * 7) % 5) as f64).collect();
    let two: Vec<_> = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (FeatureVector::new(s2.clone(), vec![i as f64, (i % 4) as f64]).unwrap(), *y))
        .collect();
    let three: Vec<_> = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (FeatureVector::new(s3.clone(), vec![i as f64, (i % 4) as f64, 7.0]).unwrap(), *y))
        .collect();
    let p = ForestParams {
        n_trees: 10,
        seed: 3,
        ..Default::default()
    };
    let (m2, m3) = (fit(&two, &p).unwrap(), fit(&three, &p).unwrap());
    for ((x2, _), (x3, _)) in two.iter().zip(&three) {
        assert_eq!(m2.predict(x2).unwrap(), m3.predict(x3).unwrap());
    }
}

#[test]
fn empty_cells_never_count() {
    use cellac_core::table::{CellRecord, Corpus, Table, TableRecord};
    let mk = |id: &str| {
        Table::from_record(TableRecord {
            id: id.into(),
            page_title: String::new(),
            caption: String::new(),
            headings: vec!["name".into(), "year".into()],
            rows: vec![vec![CellRecord::entity("A", "e:a"), CellRecord::text("")]],
            meta: None,
        })
        .unwrap()
    };
    let corpus = Corpus::from_tables(vec![mk("x"), mk("y"), mk("z")]);
    let stats = HeadingStats::build(&corpus, &kb_of(&[]));
    assert!(stats.h2h_counts().values().all(|m| m.is_empty()));
    assert_eq!(stats.n_hh("year", "year"), 0);
}

#[test]
fn three_tables_sharing_a_value_give_three_pairs() {
    use cellac_core::table::{CellRecord, Corpus, Table, TableRecord};
    let mk = |id: &str, h: &str| {
        Table::from_record(TableRecord {
            id: id.into(),
            page_title: String::new(),
            caption: String::new(),
            headings: vec!["name".into(), h.into()],
            rows: vec![vec![CellRecord::entity("A", "e:a"), CellRecord::text("1901")]],
            meta: None,
        })
        .unwrap()
    };
    let corpus = Corpus::from_tables(vec![mk("x", "year"), mk("y", "year"), mk("z", "year")]);
    let stats = HeadingStats::build(&corpus, &kb_of(&[]));
    assert_eq!(stats.n_hh("year", "year"), 3);
    assert_eq!(stats.p_h2h("year", "year"), 1.0);

    let corpus = Corpus::from_tables(vec![mk("x", "established"), mk("y", "founded")]);
    let stats = HeadingStats::build(&corpus, &kb_of(&[]));
    assert_eq!(stats.n_hh("founded", "established"), 1);
    assert_eq!(stats.n_hh("established", "founded"), 1);
}
