use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use wildset_core::hashtag::{canonical_merge, select_vocab, senses, SynsetDb, SynsetSet};

/// Short tags over a tiny alphabet so that splits hit snapshot terms often.
fn tag() -> impl Strategy<Value = String> {
    "[abc]{1,5}"
}

fn snapshot() -> impl Strategy<Value = SynsetDb> {
    prop::collection::vec(("[abc]{1,3}( [abc]{1,3})?", prop::collection::btree_set("s[0-5]", 1..3)), 0..25).prop_map(
        |rows| {
            let mut db = SynsetDb::new();
            for (term, ids) in rows {
                db.insert(&term, ids);
            }
            db
        },
    )
}

fn corpus() -> impl Strategy<Value = Vec<(String, u64)>> {
    prop::collection::vec((tag(), 1u64..50), 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn merge_partitions_by_sense_set(db in snapshot(), corpus in corpus()) {
        let m = canonical_merge(&corpus, &db);
        let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
        for (t, c) in &corpus {
            *totals.entry(t).or_default() += c;
        }
        let members: Vec<&String> = m.groups().iter().flat_map(|g| &g.members).collect();
        let distinct: BTreeSet<&String> = members.iter().copied().collect();
        prop_assert_eq!(members.len(), distinct.len());
        prop_assert_eq!(distinct.len(), totals.len());

        let mut seen_senses: BTreeSet<SynsetSet> = BTreeSet::new();
        for g in m.groups() {
            let s = senses(&g.canonical, &db).unwrap();
            prop_assert_eq!(&g.senses, &s);
            if s.is_empty() {
                prop_assert_eq!(g.members.len(), 1);
            } else {
                prop_assert!(seen_senses.insert(s.clone()), "two groups share a sense set");
            }
            for t in &g.members {
                prop_assert_eq!(&senses(t, &db).unwrap(), &s);
            }
            prop_assert_eq!(g.count, g.members.iter().map(|t| totals[t.as_str()]).sum::<u64>());
            let best = g.members.iter().map(|t| totals[t.as_str()]).max().unwrap();
            prop_assert_eq!(totals[g.canonical.as_str()], best);
            let first_best = g.members.iter().find(|t| totals[t.as_str()] == best).unwrap();
            prop_assert_eq!(&g.canonical, first_best);
        }
    }

    #[test]
    fn merge_ignores_input_order(db in snapshot(), corpus in corpus()) {
        let mut rev = corpus.clone();
        rev.reverse();
        prop_assert_eq!(canonical_merge(&corpus, &db), canonical_merge(&rev, &db));
    }

    #[test]
    fn widening_the_allowed_set_only_adds_tags(db in snapshot(), corpus in corpus(), split in 0usize..7) {
        let all: Vec<String> = db.all_synsets().into_iter().collect();
        let narrow: SynsetSet = all.iter().take(split).cloned().collect();
        let wide: SynsetSet = all.iter().cloned().collect();
        let a: BTreeSet<String> = select_vocab(&narrow, &corpus, &db, None).into_iter().map(|x| x.0).collect();
        let b: BTreeSet<String> = select_vocab(&wide, &corpus, &db, None).into_iter().map(|x| x.0).collect();
        prop_assert!(a.is_subset(&b));
        for t in &b {
            prop_assert!(!senses(t, &db).unwrap().is_empty());
        }
    }

    #[test]
    fn top_n_is_a_prefix_of_the_full_ranking(db in snapshot(), corpus in corpus(), n in 0usize..10) {
        let all = db.all_synsets();
        let full = select_vocab(&all, &corpus, &db, None);
        let top = select_vocab(&all, &corpus, &db, Some(n));
        prop_assert_eq!(&top[..], &full[..n.min(full.len())]);
        prop_assert!(full.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
    }
}
