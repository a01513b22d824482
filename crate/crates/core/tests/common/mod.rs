//! Shared helpers for the integration targets: a random document generator
//! and a deliberately naive re-implementation of feature extraction.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refsel::corpus::{Document, EntityMeta, EntityType, FormLabel, Gender, Mention, MetaTable, Syn, Token};
use refsel::features::{DisStat, DistAnt, FeatureVector, IntRef, MetaPro, Prominence, SenStat};

pub const TABLE1: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/table1.jsonl");

const ENTITIES: [&str; 6] = ["E_a", "E_b", "E_c", "E_d", "E_e", "E_f"];

/// A small random document over a six-entity pool. Entity tokens are dense
/// enough that repeats, same-sentence repeats and adjacent repeats are all
/// common.
pub fn random_document(rng: &mut ChaCha8Rng, doc_id: String) -> Document {
    let sentences = rng.random_range(1..=5);
    let pool = rng.random_range(1..=ENTITIES.len());
    let mut tokens = Vec::new();
    for s in 0..sentences {
        for _ in 0..rng.random_range(1..=8) {
            if rng.random_bool(0.4) {
                tokens.push(Token::entity(ENTITIES[rng.random_range(0..pool)], s));
            } else {
                tokens.push(Token::word("w", s));
            }
        }
    }
    let forms = [
        FormLabel::Demonstrative,
        FormLabel::Description,
        FormLabel::ProperName,
        FormLabel::Pronoun,
    ];
    let mentions = tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            t.entity_id.as_ref().map(|e| Mention {
                token_index: i,
                entity_id: e.clone(),
                form: forms[rng.random_range(0..4)],
                syn: if rng.random_bool(0.5) {
                    Syn::Subject
                } else {
                    Syn::Object
                },
            })
        })
        .collect();
    Document {
        doc_id,
        tokens,
        mentions,
    }
}

pub fn random_documents(seed: u64, n: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_document(&mut rng, format!("doc{i}"))).collect()
}

/// Metadata for some of the pool; the rest fall back to `(Other, other)`.
pub fn random_meta(seed: u64) -> MetaTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = [
        EntityType::Person,
        EntityType::Organisation,
        EntityType::Location,
        EntityType::Number,
    ];
    let genders = [Gender::Male, Gender::Female, Gender::Other];
    let mut items = Vec::new();
    for e in ENTITIES {
        if rng.random_bool(0.7) {
            items.push(EntityMeta {
                entity_id: e.to_string(),
                entity_type: types[rng.random_range(0..types.len())],
                gender: genders[rng.random_range(0..genders.len())],
            });
        }
    }
    MetaTable::new(items).unwrap()
}

/// Percentile by walking to the fractional rank of the sorted values.
pub fn naive_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = q * (v.len() - 1) as f64;
    let below = rank.floor() as usize;
    if below + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[below] * (1.0 - (rank - below as f64)) + v[below + 1] * (rank - below as f64)
}

fn sentence_of(doc: &Document, m: usize) -> usize {
    doc.tokens[doc.mentions[m].token_index].sentence_index
}

/// Every earlier-mention relation is found by scanning all mentions.
pub fn naive_features(
    doc: &Document,
    meta: &MetaTable,
    corpus_counts: &HashMap<String, usize>,
    bounds: [f64; 4],
) -> Vec<FeatureVector> {
    let n = doc.mentions.len();
    let count_in_doc = |e: &str| doc.mentions.iter().filter(|m| m.entity_id == e).count();
    let first_token = |e: &str| {
        doc.mentions
            .iter()
            .filter(|m| m.entity_id == e)
            .map(|m| m.token_index)
            .min()
            .unwrap()
    };
    let mut prominent: Option<&str> = None;
    for m in &doc.mentions {
        let e = m.entity_id.as_str();
        let better = match prominent {
            None => true,
            Some(p) => {
                count_in_doc(e) > count_in_doc(p)
                    || (count_in_doc(e) == count_in_doc(p) && first_token(e) < first_token(p))
            }
        };
        if better {
            prominent = Some(e);
        }
    }

    (0..n)
        .map(|m| {
            let me = &doc.mentions[m];
            let mut antecedent: Option<usize> = None;
            let mut same_sentence_before = false;
            for a in 0..n {
                let other = &doc.mentions[a];
                if other.token_index < me.token_index && other.entity_id == me.entity_id {
                    if antecedent.is_none_or(|b| doc.mentions[b].token_index < other.token_index) {
                        antecedent = Some(a);
                    }
                    if sentence_of(doc, a) == sentence_of(doc, m) {
                        same_sentence_before = true;
                    }
                }
            }
            let mut preceding: Option<usize> = None;
            for a in 0..n {
                if doc.mentions[a].token_index < me.token_index
                    && preceding.is_none_or(|b| doc.mentions[b].token_index < doc.mentions[a].token_index)
                {
                    preceding = Some(a);
                }
            }
            let old = antecedent.is_some();
            let dist_ant = match antecedent {
                None => DistAnt::FirstMention,
                Some(a) => match sentence_of(doc, m) - sentence_of(doc, a) {
                    0 => DistAnt::SameSentence,
                    1 => DistAnt::OneAway,
                    _ => DistAnt::MoreThanOne,
                },
            };
            let int_ref = match (antecedent, preceding) {
                (None, _) => IntRef::FirstMention,
                (Some(_), Some(p)) if doc.mentions[p].entity_id == me.entity_id => IntRef::PreviousSame,
                _ => IntRef::PreviousDifferent,
            };
            let dist_ant_w = match antecedent {
                None => 4,
                Some(a) => {
                    let d = (me.token_index - doc.mentions[a].token_index) as f64;
                    bounds.iter().filter(|&&b| b < d).count() as u8
                }
            };
            let count = corpus_counts.get(&me.entity_id).copied().unwrap_or(0);
            let meta_pro = if count < 50 {
                MetaPro::B0To50
            } else if count < 150 {
                MetaPro::B50To150
            } else if count < 290 {
                MetaPro::B150To290
            } else {
                MetaPro::B290Up
            };
            let (entity_type, gender) = meta
                .iter()
                .find(|e| e.entity_id == me.entity_id)
                .map_or((EntityType::Other, Gender::Other), |e| (e.entity_type, e.gender));
            let yes = |b: bool| {
                if b {
                    Prominence::Prominent
                } else {
                    Prominence::NotProminent
                }
            };
            FeatureVector {
                dis_stat: if old {
                    DisStat::DiscourseOld
                } else {
                    DisStat::DiscourseNew
                },
                sen_stat: if same_sentence_before {
                    SenStat::SentenceOld
                } else {
                    SenStat::SentenceNew
                },
                syn: me.syn,
                dist_ant,
                int_ref,
                loc_pro: yes(old && me.syn == Syn::Subject),
                glo_pro: yes(prominent == Some(me.entity_id.as_str())),
                meta_pro,
                dist_ant_w,
                sent_1: sentence_of(doc, m) == 0,
                entity_type,
                gender,
            }
        })
        .collect()
}

pub fn naive_counts(docs: &[Document]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for d in docs {
        for m in &d.mentions {
            *counts.entry(m.entity_id.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Runs extract_all on the documents as one split and compares each mention
/// against the naive scan. Returns `(mentions compared, mismatches)`.
pub fn compare_with_oracle(docs: Vec<Document>, meta: &MetaTable) -> (usize, usize) {
    use refsel::corpus::{CorpusSplit, SplitName};
    use refsel::features::{extract_all, fit_quantile_bounds, MentionCounts};

    let split = CorpusSplit::new(SplitName::Train, docs).unwrap();
    let counts = MentionCounts::from_splits([&split]);
    let bounds = fit_quantile_bounds(&split).unwrap();
    let got = extract_all(&split, meta, &counts, &bounds).unwrap();

    let mut distances = Vec::new();
    for d in &split.documents {
        for (j, m) in d.mentions.iter().enumerate() {
            let prev = d.mentions[..j].iter().rev().find(|p| p.entity_id == m.entity_id);
            if let Some(p) = prev {
                distances.push((m.token_index - p.token_index) as f64);
            }
        }
    }
    let naive_bounds = [0.2, 0.4, 0.6, 0.8].map(|q| naive_percentile(&distances, q));
    let naive_counts = naive_counts(&split.documents);
    let mut want = Vec::new();
    for d in &split.documents {
        want.extend(naive_features(d, meta, &naive_counts, naive_bounds));
    }
    assert_eq!(got.rows.len(), want.len());
    let mismatches = got.rows.iter().zip(&want).filter(|(g, w)| g.features != **w).count();
    (want.len(), mismatches)
}
