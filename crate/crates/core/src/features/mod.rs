//! Per-mention discourse features: the eight probing labels plus the
//! feature-based baseline's inputs (word distance quantile, first-sentence
//! flag, entity type, gender).
//!
//! A mention's *nearest antecedent* is the earlier mention of the same entity
//! with the largest token index.

mod labels;
mod quantiles;
mod table;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSplit, Document, EntityType, Gender, MetaTable, Syn};
use crate::error::{Error, Result};

pub use labels::{Categorical, DisStat, DistAnt, IntRef, MetaPro, Prominence, SenStat};
pub use quantiles::{linear_percentile, QuantileBounds};
pub use table::{write_feature_table, FeatureRow, FeatureTable, FEATURE_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dis_stat: DisStat,
    pub sen_stat: SenStat,
    pub syn: Syn,
    pub dist_ant: DistAnt,
    pub int_ref: IntRef,
    pub loc_pro: Prominence,
    pub glo_pro: Prominence,
    pub meta_pro: MetaPro,
    pub dist_ant_w: u8,
    pub sent_1: bool,
    pub entity_type: EntityType,
    pub gender: Gender,
}

impl FeatureVector {
    /// Checks the cross-field consistency that every extracted vector obeys.
    pub fn is_consistent(&self) -> bool {
        let new = self.dis_stat == DisStat::DiscourseNew;
        let first_agree =
            new == (self.dist_ant == DistAnt::FirstMention) && new == (self.int_ref == IntRef::FirstMention);
        let loc = (self.loc_pro == Prominence::Prominent) == (!new && self.syn == Syn::Subject);
        let sen = !new || self.sen_stat == SenStat::SentenceNew;
        first_agree && loc && sen && self.dist_ant_w <= 4
    }
}

/// Which documents contribute to the corpus-wide entity counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CountScope {
    #[default]
    Full,
    Train,
}

/// Corpus-wide mention count per entity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionCounts(HashMap<String, usize>);

impl MentionCounts {
    pub fn from_splits<'a>(splits: impl IntoIterator<Item = &'a CorpusSplit>) -> Self {
        let mut counts = HashMap::new();
        for split in splits {
            for doc in &split.documents {
                for m in &doc.mentions {
                    *counts.entry(m.entity_id.clone()).or_insert(0) += 1;
                }
            }
        }
        MentionCounts(counts)
    }

    pub fn from_corpus(corpus: &Corpus, scope: CountScope) -> Self {
        match scope {
            CountScope::Full => Self::from_splits(corpus.splits()),
            CountScope::Train => Self::from_splits([&corpus.train]),
        }
    }

    pub fn get(&self, entity_id: &str) -> usize {
        self.0.get(entity_id).copied().unwrap_or(0)
    }

    pub fn insert(&mut self, entity_id: impl Into<String>, count: usize) {
        self.0.insert(entity_id.into(), count);
    }
}

fn check_index(doc: &Document, m: usize) -> Result<()> {
    if m < doc.mentions.len() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: m,
            len: doc.mentions.len(),
        })
    }
}

/// Index of the nearest antecedent of mention `m`.
pub fn nearest_antecedent(doc: &Document, m: usize) -> Result<Option<usize>> {
    check_index(doc, m)?;
    let id = &doc.mentions[m].entity_id;
    Ok((0..m).rev().find(|&j| &doc.mentions[j].entity_id == id))
}

pub fn extract_dis_stat(doc: &Document, m: usize) -> Result<DisStat> {
    Ok(match nearest_antecedent(doc, m)? {
        Some(_) => DisStat::DiscourseOld,
        None => DisStat::DiscourseNew,
    })
}

pub fn extract_sen_stat(doc: &Document, m: usize) -> Result<SenStat> {
    check_index(doc, m)?;
    let sentence = doc.mention_sentence(m);
    let id = &doc.mentions[m].entity_id;
    let old = (0..m).any(|j| &doc.mentions[j].entity_id == id && doc.mention_sentence(j) == sentence);
    Ok(if old {
        SenStat::SentenceOld
    } else {
        SenStat::SentenceNew
    })
}

pub fn extract_dist_ant(doc: &Document, m: usize) -> Result<DistAnt> {
    Ok(match nearest_antecedent(doc, m)? {
        None => DistAnt::FirstMention,
        Some(a) => match doc.mention_sentence(m) - doc.mention_sentence(a) {
            0 => DistAnt::SameSentence,
            1 => DistAnt::OneAway,
            _ => DistAnt::MoreThanOne,
        },
    })
}

pub fn extract_int_ref(doc: &Document, m: usize) -> Result<IntRef> {
    if nearest_antecedent(doc, m)?.is_none() {
        return Ok(IntRef::FirstMention);
    }
    // An antecedent exists, so m > 0.
    Ok(if doc.mentions[m - 1].entity_id == doc.mentions[m].entity_id {
        IntRef::PreviousSame
    } else {
        IntRef::PreviousDifferent
    })
}

pub fn extract_loc_pro(doc: &Document, m: usize) -> Result<Prominence> {
    let old = extract_dis_stat(doc, m)? == DisStat::DiscourseOld;
    Ok(if old && doc.mentions[m].syn == Syn::Subject {
        Prominence::Prominent
    } else {
        Prominence::NotProminent
    })
}

/// The document's most frequently mentioned entity; ties go to the entity
/// introduced first. `None` for documents without mentions.
pub fn globally_prominent_entity(doc: &Document) -> Option<&str> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for m in &doc.mentions {
        match counts.iter_mut().find(|(id, _)| *id == m.entity_id) {
            Some((_, n)) => *n += 1,
            None => counts.push((m.entity_id.as_str(), 1)),
        }
    }
    // `counts` is in first-mention order; keep the first maximum.
    let mut best: Option<(&str, usize)> = None;
    for (id, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((id, n));
        }
    }
    best.map(|(id, _)| id)
}

pub fn extract_glo_pro(doc: &Document, m: usize) -> Result<Prominence> {
    check_index(doc, m)?;
    Ok(
        if globally_prominent_entity(doc) == Some(doc.mentions[m].entity_id.as_str()) {
            Prominence::Prominent
        } else {
            Prominence::NotProminent
        },
    )
}

pub fn meta_pro_bucket(count: usize) -> MetaPro {
    match count {
        0..50 => MetaPro::B0To50,
        50..150 => MetaPro::B50To150,
        150..290 => MetaPro::B150To290,
        _ => MetaPro::B290Up,
    }
}

pub fn extract_meta_pro(counts: &MentionCounts, entity_id: &str) -> MetaPro {
    meta_pro_bucket(counts.get(entity_id))
}

/// Token distance to the nearest antecedent, `None` for first mentions.
pub fn antecedent_word_distance(doc: &Document, m: usize) -> Result<Option<usize>> {
    Ok(nearest_antecedent(doc, m)?.map(|a| doc.mentions[m].token_index - doc.mentions[a].token_index))
}

pub fn extract_dist_ant_w(doc: &Document, m: usize, bounds: &QuantileBounds) -> Result<u8> {
    let distance = antecedent_word_distance(doc, m)?;
    bounds.bin(distance)
}

pub fn extract_sent_1(doc: &Document, m: usize) -> Result<bool> {
    check_index(doc, m)?;
    Ok(doc.mention_sentence(m) == 0)
}

/// Fits the word-distance quantile bounds over the antecedent-bearing
/// mentions of `split`.
pub fn fit_quantile_bounds(split: &CorpusSplit) -> Result<QuantileBounds> {
    let mut distances = Vec::new();
    for doc in &split.documents {
        for m in 0..doc.mentions.len() {
            if let Some(d) = antecedent_word_distance(doc, m)? {
                distances.push(d as f64);
            }
        }
    }
    QuantileBounds::fit(&distances)
}

/// Single-pass extraction of every feature for one document.
pub fn extract_document(
    doc: &Document,
    meta: &MetaTable,
    counts: &MentionCounts,
    bounds: &QuantileBounds,
) -> Result<Vec<FeatureVector>> {
    let glo = globally_prominent_entity(doc);
    let mut last_seen: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(doc.mentions.len());
    for (i, m) in doc.mentions.iter().enumerate() {
        let sentence = doc.mention_sentence(i);
        let antecedent = last_seen.get(m.entity_id.as_str()).copied();
        let (dis_stat, sen_stat, dist_ant, int_ref, distance) = match antecedent {
            None => (
                DisStat::DiscourseNew,
                SenStat::SentenceNew,
                DistAnt::FirstMention,
                IntRef::FirstMention,
                None,
            ),
            Some(a) => {
                let gap = sentence - doc.mention_sentence(a);
                let sen_stat = if gap == 0 {
                    SenStat::SentenceOld
                } else {
                    SenStat::SentenceNew
                };
                let dist_ant = match gap {
                    0 => DistAnt::SameSentence,
                    1 => DistAnt::OneAway,
                    _ => DistAnt::MoreThanOne,
                };
                let int_ref = if a == i - 1 {
                    IntRef::PreviousSame
                } else {
                    IntRef::PreviousDifferent
                };
                let distance = m.token_index - doc.mentions[a].token_index;
                (DisStat::DiscourseOld, sen_stat, dist_ant, int_ref, Some(distance))
            }
        };
        let loc_pro = if dis_stat == DisStat::DiscourseOld && m.syn == Syn::Subject {
            Prominence::Prominent
        } else {
            Prominence::NotProminent
        };
        let glo_pro = if glo == Some(m.entity_id.as_str()) {
            Prominence::Prominent
        } else {
            Prominence::NotProminent
        };
        let (entity_type, gender) = meta.lookup(&m.entity_id);
        out.push(FeatureVector {
            dis_stat,
            sen_stat,
            syn: m.syn,
            dist_ant,
            int_ref,
            loc_pro,
            glo_pro,
            meta_pro: extract_meta_pro(counts, &m.entity_id),
            dist_ant_w: bounds.bin(distance)?,
            sent_1: sentence == 0,
            entity_type,
            gender,
        });
        last_seen.insert(m.entity_id.as_str(), i);
    }
    Ok(out)
}

pub fn extract_all(
    split: &CorpusSplit,
    meta: &MetaTable,
    counts: &MentionCounts,
    bounds: &QuantileBounds,
) -> Result<FeatureTable> {
    let mut rows = Vec::with_capacity(split.mention_count());
    for doc in &split.documents {
        for (i, features) in extract_document(doc, meta, counts, bounds)?.into_iter().enumerate() {
            rows.push(FeatureRow {
                doc_id: doc.doc_id.clone(),
                mention_index: i,
                features,
            });
        }
    }
    Ok(FeatureTable { rows })
}

/// Feature tables for all three splits with train-fitted quantile bounds.
#[derive(Debug, Clone)]
pub struct CorpusFeatures {
    pub bounds: QuantileBounds,
    pub train: FeatureTable,
    pub dev: FeatureTable,
    pub test: FeatureTable,
}

pub fn extract_corpus(corpus: &Corpus, meta: &MetaTable, scope: CountScope) -> Result<CorpusFeatures> {
    let counts = MentionCounts::from_corpus(corpus, scope);
    let bounds = fit_quantile_bounds(&corpus.train)?;
    Ok(CorpusFeatures {
        train: extract_all(&corpus.train, meta, &counts, &bounds)?,
        dev: extract_all(&corpus.dev, meta, &counts, &bounds)?,
        test: extract_all(&corpus.test, meta, &counts, &bounds)?,
        bounds,
    })
}
