mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellac_core::forest::ForestParams;
use cellac_core::matching::{
    extract_match_features, parse_pairs, pairs_to_text, tmatch_score, train_tmatch, GradedPair, MatchSettings,
    TableProfile,
};
use cellac_core::synth::{SynthParams, Synthetic};
use cellac_core::table::{Corpus, Table};

use common::*;

fn world() -> Corpus {
    let w = Synthetic::generate(&SynthParams {
        seed: 3,
        scale: 0.3,
        pairs: 0,
        ..Default::default()
    });
    Corpus::from_tables(w.tables.into_iter().map(|r| Table::from_record(r).unwrap()).collect())
}

/// Random table pairs, biased towards pairs that share entities so both
/// grades are represented.
fn sample_pairs(corpus: &Corpus, n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = (0..corpus.len()).collect();
    let mut out = Vec::new();
    while out.len() < n {
        let a = *idx.choose(&mut rng).unwrap();
        let b = if out.len() % 2 == 0 {
            let t = &corpus.tables()[a];
            let e = t.core_entities().collect::<Vec<_>>();
            let Some(e) = e.choose(&mut rng) else { continue };
            let others = corpus.tables_with_entity(e);
            *others.choose(&mut rng).unwrap() as usize
        } else {
            *idx.choose(&mut rng).unwrap()
        };
        if a != b {
            out.push((a, b));
        }
    }
    out
}

/// Copies of corpus tables keeping a random fraction of their rows, so the
/// entity overlap with the source spans the whole range.
fn thinned(corpus: &Corpus, n: usize, seed: u64) -> Vec<(usize, Table)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a = rng.gen_range(0..corpus.len());
            let mut rec = corpus.tables()[a].to_record();
            let keep: f64 = rng.gen();
            rec.rows.retain(|_| rng.gen_bool(keep));
            if rec.rows.is_empty() {
                rec.rows = corpus.tables()[a].to_record().rows[..1].to_vec();
            }
            rec.id = format!("thin{seed}-{i}");
            (a, Table::from_record(rec).unwrap())
        })
        .collect()
}

#[test]
fn tmatch_learns_an_overlap_rule() {
    let corpus = world();
    let settings = MatchSettings::default();
    let tables = corpus.tables();
    let features = |a: &Table, b: &Table| {
        extract_match_features(&TableProfile::new(a), &TableProfile::new(b), None, &corpus, &settings)
    };
    let grade = |a: &Table, b: &Table| if features(a, b).entity_overlap > 0.5 { 2 } else { 0 };

    // half the training pairs are a table against a thinned copy, half random
    let train = thinned(&corpus, 300, 1);
    let mut pairs: Vec<GradedPair> = train
        .iter()
        .map(|(a, t)| GradedPair {
            input: tables[*a].id.clone(),
            candidate: t.id.clone(),
            grade: grade(&tables[*a], t),
        })
        .collect();
    pairs.extend(sample_pairs(&corpus, 300, 1).into_iter().map(|(a, b)| GradedPair {
        input: tables[a].id.clone(),
        candidate: tables[b].id.clone(),
        grade: grade(&tables[a], &tables[b]),
    }));
    let positives = pairs.iter().filter(|p| p.grade == 2).count();
    assert!(positives > 60 && positives < 540, "{positives} positives");
    let mut all = tables.to_vec();
    all.extend(train.into_iter().map(|(_, t)| t));
    let lookup = Corpus::from_tables(all);

    let params = ForestParams {
        n_trees: 30,
        seed: 4,
        ..Default::default()
    };
    let model = train_tmatch(&pairs, &lookup, &corpus, &settings, &params).unwrap();

    let mut held_out: Vec<(Table, Table)> =
        thinned(&corpus, 200, 2).into_iter().map(|(a, t)| (tables[a].clone(), t)).collect();
    held_out.extend(sample_pairs(&corpus, 200, 2).into_iter().map(|(a, b)| (tables[a].clone(), tables[b].clone())));
    let mut correct = 0;
    for (a, b) in &held_out {
        let predicted = tmatch_score(&model, &features(a, b)).unwrap() > 0.5;
        correct += usize::from(predicted == (grade(a, b) == 2));
    }
    let acc = correct as f64 / held_out.len() as f64;
    assert!(acc > 0.9, "held-out accuracy {acc}");

    // a table matches itself at least as well as an average random partner
    let mut self_total = 0.0;
    let mut random_total = 0.0;
    for (a, b) in held_out.iter().skip(200).take(100) {
        self_total += tmatch_score(&model, &features(a, a)).unwrap();
        random_total += tmatch_score(&model, &features(a, b)).unwrap();
    }
    assert!(self_total >= random_total);
}

#[test]
fn constant_grades_give_a_constant_scorer() {
    let corpus = world();
    let settings = MatchSettings::default();
    let tables = corpus.tables();
    let pairs: Vec<GradedPair> = sample_pairs(&corpus, 80, 5)
        .into_iter()
        .map(|(a, b)| GradedPair {
            input: tables[a].id.clone(),
            candidate: tables[b].id.clone(),
            grade: 1,
        })
        .collect();
    let model = train_tmatch(
        &pairs,
        &corpus,
        &corpus,
        &settings,
        &ForestParams {
            n_trees: 5,
            ..Default::default()
        },
    )
    .unwrap();
    for (a, b) in sample_pairs(&corpus, 30, 6) {
        let f = extract_match_features(
            &TableProfile::new(&tables[a]),
            &TableProfile::new(&tables[b]),
            None,
            &corpus,
            &settings,
        );
        assert_eq!(tmatch_score(&model, &f).unwrap(), 0.5);
    }
}

#[test]
fn pairs_with_unknown_tables_are_skipped() {
    let corpus = world();
    let id = corpus.tables()[0].id.clone();
    let pairs = vec![
        GradedPair {
            input: id.clone(),
            candidate: "missing".into(),
            grade: 2,
        },
        GradedPair {
            input: id.clone(),
            candidate: id.clone(),
            grade: 2,
        },
        GradedPair {
            input: id.clone(),
            candidate: corpus.tables()[1].id.clone(),
            grade: 0,
        },
    ];
    let model = train_tmatch(
        &pairs,
        &corpus,
        &corpus,
        &MatchSettings::default(),
        &ForestParams {
            n_trees: 2,
            ..Default::default()
        },
    );
    assert!(model.is_ok());
}

#[test]
fn graded_pairs_round_trip_and_reject_bad_grades() {
    let pairs = vec![
        GradedPair {
            input: "a".into(),
            candidate: "b".into(),
            grade: 0,
        },
        GradedPair {
            input: "a".into(),
            candidate: "c".into(),
            grade: 2,
        },
    ];
    assert_eq!(parse_pairs(&pairs_to_text(&pairs)).unwrap(), pairs);
    assert!(parse_pairs("a\tb\t3\n").is_err());
    assert!(parse_pairs("a\tb\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trips_through_jsonl(seed in 0u64..10_000) {
        let (corpus, _) = random_world(seed);
        let back = Corpus::parse_jsonl(&corpus.to_jsonl());
        prop_assert_eq!(back.len(), corpus.len());
        for t in corpus.tables() {
            let u = back.get(&t.id).unwrap();
            prop_assert_eq!(u.to_record(), t.to_record());
        }
    }

    #[test]
    fn ingestion_order_does_not_change_the_index(seed in 0u64..10_000) {
        let (corpus, triples) = random_world(seed);
        let mut tables = corpus.tables().to_vec();
        tables.reverse();
        let reversed = Corpus::from_tables(tables);
        for e in (0..10).map(|i| format!("e{i}")) {
            let mut a: Vec<String> = corpus.tables_with_entity(&e).iter().map(|&i| corpus.table(i).id.clone()).collect();
            let mut b: Vec<String> = reversed.tables_with_entity(&e).iter().map(|&i| reversed.table(i).id.clone()).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
        let kb = kb_of(&triples);
        prop_assert_eq!(
            cellac_core::stats::HeadingStats::build(&corpus, &kb),
            cellac_core::stats::HeadingStats::build(&reversed, &kb)
        );
    }

    #[test]
    fn kb_lookup_agrees_with_predicates_of(seed in 0u64..10_000) {
        let (_, triples) = random_world(seed);
        let kb = kb_of(&triples);
        for e in (0..10).map(|i| format!("e{i}")) {
            let preds = kb.predicates_of(&e);
            for p in ["p:year", "p:size", "p:label"] {
                let has = triples.iter().any(|t| t.subject == e && t.predicate == p);
                prop_assert_eq!(preds.contains(&p), has);
                prop_assert_eq!(!kb.lookup(&e, p).is_empty(), has);
                for o in kb.lookup(&e, p) {
                    prop_assert!(triples.iter().any(|t| t.subject == e && t.predicate == p && t.object == o));
                }
            }
        }
    }
}
