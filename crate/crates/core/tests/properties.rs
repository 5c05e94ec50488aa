use std::collections::BTreeSet;

use proptest::prelude::*;

use argmine::corpus::{demo_corpus, split_corpus, Clause, DemoOptions, Membership, Role};
use argmine::embeddings::balanced_lengths;
use argmine::evaluation::weighted_metrics;
use argmine::taskgen::build_relation_pairs;
use argmine::training::{select_fold, simulate_early_stopping};

fn clause(i: usize, args: &[u8]) -> Clause {
    let mut memberships: Vec<Membership> = args
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|a| Membership {
            argument_id: format!("a{a}"),
            role: if i % 3 == 0 { Role::Conclusion } else { Role::Premise },
        })
        .collect();
    memberships.sort();
    Clause {
        clause_id: format!("c{i}"),
        document_id: "d".into(),
        order_index: i,
        text: String::new(),
        memberships,
    }
}

/// One token at a time from the longer side, `a` on ties.
fn truncation_oracle(mut a: usize, mut b: usize, budget: usize) -> (usize, usize) {
    while a + b > budget {
        if b > a {
            b -= 1;
        } else {
            a -= 1;
        }
    }
    (a, b)
}

proptest! {
    #[test]
    fn pair_count_matches_closed_form(
        args in prop::collection::vec(prop::collection::vec(0u8..5, 1..3), 0..40),
        window in 2usize..12,
    ) {
        let clauses: Vec<Clause> = args.iter().enumerate().map(|(i, a)| clause(i, a)).collect();
        let refs: Vec<&Clause> = clauses.iter().collect();
        let pairs = build_relation_pairs(&refs, window).unwrap();
        let n = clauses.len();
        let expected: usize = (0..n).map(|i| (n - 1 - i).min(window - 1)).sum();
        prop_assert_eq!(pairs.len(), expected);
        for p in &pairs {
            prop_assert!(p.offset >= 1 && p.offset < window);
            let i: usize = p.clause_id_a[1..].parse().unwrap();
            let j: usize = p.clause_id_b[1..].parse().unwrap();
            prop_assert_eq!(j - i, p.offset);
            let shared = !args[i].iter().collect::<BTreeSet<_>>().is_disjoint(&args[j].iter().collect());
            prop_assert_eq!(p.label, u8::from(shared));
        }
    }

    #[test]
    fn weighted_scores_are_bounded_and_perfect_on_identity(
        labels in prop::collection::vec((0usize..3, 0usize..3), 1..120),
    ) {
        let (t, p): (Vec<usize>, Vec<usize>) = labels.into_iter().unzip();
        let m = weighted_metrics(&t, &p).unwrap();
        for v in [m.weighted_precision, m.weighted_recall, m.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // Weighted recall reduces to accuracy.
        let acc = t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / t.len() as f64;
        prop_assert!((m.weighted_recall - acc).abs() < 1e-12);
        let same = weighted_metrics(&t, &t).unwrap();
        for v in [same.weighted_precision, same.weighted_recall, same.weighted_f1] {
            prop_assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn splits_partition_documents(documents in 6usize..60, k in 2usize..6, seed in any::<u64>()) {
        let corpus = demo_corpus(&DemoOptions { documents, seed: 3 });
        let Ok(split) = split_corpus(&corpus, 0.8, k, seed) else {
            // Only too-small corpora may be rejected.
            prop_assert!(((0.8 * documents as f64) + 0.5).floor() as usize >= documents || documents * 4 / 5 < k);
            return Ok(());
        };
        let all: BTreeSet<String> = corpus.document_ids().into_iter().collect();
        prop_assert!(split.train_doc_ids.is_disjoint(&split.test_doc_ids));
        prop_assert_eq!(&split.train_doc_ids | &split.test_doc_ids, all);
        let sizes: Vec<usize> = split.folds.iter().map(|(_, v)| v.len()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sizes[0] - sizes[k - 1] <= 1);
        let mut seen = BTreeSet::new();
        for (train, val) in &split.folds {
            prop_assert!(train.is_disjoint(val));
            prop_assert_eq!(&(train | val), &split.train_doc_ids);
            for d in val {
                prop_assert!(seen.insert(d.clone()), "document in two validation folds");
            }
        }
        prop_assert_eq!(split_corpus(&corpus, 0.8, k, seed).unwrap(), split);
    }

    #[test]
    fn balanced_truncation_matches_token_by_token_oracle(a in 0usize..700, b in 0usize..700, budget in 1usize..600) {
        prop_assert_eq!(balanced_lengths(a, b, budget), truncation_oracle(a, b, budget));
    }

    #[test]
    fn early_stopping_never_exceeds_cap_and_restores_minimum(
        curve in prop::collection::vec(0u8..30, 1..80),
        cap in 1usize..100,
    ) {
        let losses: Vec<f64> = curve.iter().map(|&v| f64::from(v) / 10.0).collect();
        let (run, best) = simulate_early_stopping(&losses, 5, cap);
        prop_assert!(run <= cap.min(losses.len()));
        prop_assert!(best >= 1 && best <= run);
        let seen = &losses[..run];
        let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
        // Best epoch is the first occurrence of the minimum seen so far.
        prop_assert_eq!(best, seen.iter().position(|&l| l == min).unwrap() + 1);
        if run < cap.min(losses.len()) {
            prop_assert_eq!(run - best, 5);
        }
    }

    #[test]
    fn fold_selection_takes_first_maximum(scores in prop::collection::vec(0u8..5, 1..8)) {
        let values: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(select_fold(&values), values.iter().position(|&v| v == max).unwrap());
    }
}
