mod common;

use proptest::prelude::*;
use refsel::corpus::{parse_corpus, MetaTable, SplitName};
use refsel::features::{extract_all, MentionCounts, Prominence, QuantileBounds};

#[test]
fn thousand_random_documents_match_naive_scan() {
    let docs = common::random_documents(11, 1000);
    let (mentions, mismatches) = common::compare_with_oracle(docs, &common::random_meta(12));
    assert!(mentions > 3000, "only {mentions} mentions generated");
    assert_eq!(mismatches, 0);
}

#[test]
fn table1_file_matches_naive_scan() {
    let split = parse_corpus(common::TABLE1, SplitName::Train).unwrap();
    let (mentions, mismatches) = common::compare_with_oracle(split.documents, &MetaTable::default());
    assert_eq!((mentions, mismatches), (9, 0));
}

#[test]
fn glo_pro_marks_exactly_one_entity_with_maximal_count() {
    for doc in common::random_documents(5, 200) {
        if doc.mentions.is_empty() {
            continue;
        }
        let split = refsel::corpus::CorpusSplit::new(SplitName::Train, vec![doc.clone()]).unwrap();
        let bounds = QuantileBounds::from_bounds([1.0, 2.0, 3.0, 4.0]);
        let counts = MentionCounts::from_splits([&split]);
        let table = extract_all(&split, &MetaTable::default(), &counts, &bounds).unwrap();
        let rows = &table.rows;
        let prominent: std::collections::BTreeSet<&str> = rows
            .iter()
            .zip(&doc.mentions)
            .filter(|(r, _)| r.features.glo_pro == Prominence::Prominent)
            .map(|(_, m)| m.entity_id.as_str())
            .collect();
        assert_eq!(prominent.len(), 1);
        let winner = *prominent.iter().next().unwrap();
        let count = |e: &str| doc.mentions.iter().filter(|m| m.entity_id == e).count();
        let max = doc.mentions.iter().map(|m| count(&m.entity_id)).max().unwrap();
        assert_eq!(count(winner), max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_small_corpora_match_naive_scan(seed in any::<u64>(), n in 5usize..40) {
        let docs = common::random_documents(seed, n);
        let has_repeat = docs.iter().any(|d| {
            d.mentions.iter().enumerate().any(|(j, m)| d.mentions[..j].iter().any(|p| p.entity_id == m.entity_id))
        });
        prop_assume!(has_repeat);
        let (_, mismatches) = common::compare_with_oracle(docs, &common::random_meta(seed ^ 1));
        prop_assert_eq!(mismatches, 0);
    }
}
