//! Seeded generator for delexicalised corpora with a planted form rule.
//!
//! Every sentence is `SUBJ verb filler* (prep OBJ)+ .` so syntactic role is
//! recoverable from position. Gold forms follow [`planted_form`]: pronoun for
//! discourse-old subjects, proper name for discourse-new mentions,
//! description otherwise. With probability `noise` the gold form is replaced
//! by one of the three other forms, chosen uniformly.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Corpus, CorpusSplit, Document, EntityMeta, EntityType, FormLabel, Gender, Mention, MetaTable, SplitName, Syn, Token,
};
use crate::error::{Error, Result};

const VERBS: &[&str] = &["is", "has", "leads", "owns", "serves", "runs", "was", "hosts"];
const PREPS: &[&str] = &["in", "of", "by", "near", "with", "for", "to"];
const FILLERS: &[&str] = &[
    "the", "state", "city", "known", "located", "part", "member", "large", "famous", "old",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Filler words between verb and first object, drawn uniformly.
    pub min_filler: usize,
    pub max_filler: usize,
    pub entities: usize,
    pub entities_per_doc: usize,
    /// Exponent of the Zipf weights over the entity inventory.
    pub zipf_exponent: f64,
    /// Probability that a slot re-uses an already mentioned entity.
    pub reuse_prob: f64,
    pub noise: f64,
    pub train_fraction: f64,
    pub dev_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 500,
            min_sentences: 1,
            max_sentences: 4,
            min_objects: 1,
            max_objects: 2,
            min_filler: 0,
            max_filler: 3,
            entities: 16,
            entities_per_doc: 4,
            zipf_exponent: 1.0,
            reuse_prob: 0.5,
            noise: 0.0,
            train_fraction: 0.8,
            dev_fraction: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.documents == 0 {
            return bad("documents must be positive");
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return bad("need 1 <= min_sentences <= max_sentences");
        }
        if self.min_objects > self.max_objects {
            return bad("need min_objects <= max_objects");
        }
        if self.min_filler > self.max_filler {
            return bad("need min_filler <= max_filler");
        }
        if self.entities == 0 || self.entities_per_doc == 0 {
            return bad("entity counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.reuse_prob) {
            return bad("reuse_prob must lie in [0, 1]");
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return bad("zipf_exponent must be finite and non-negative");
        }
        let f = (self.train_fraction, self.dev_fraction);
        if f.0 <= 0.0 || f.1 < 0.0 || f.0 + f.1 > 1.0 {
            return bad("split fractions must be non-negative with train > 0 and train + dev <= 1");
        }
        Ok(())
    }
}

/// The noise-free form for a mention.
pub fn planted_form(discourse_old: bool, syn: Syn) -> FormLabel {
    match (discourse_old, syn) {
        (true, Syn::Subject) => FormLabel::Pronoun,
        (false, _) => FormLabel::ProperName,
        (true, Syn::Object) => FormLabel::Description,
    }
}

pub fn entity_label(i: usize) -> String {
    format!("Entity_{i:02}")
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub corpus: Corpus,
    pub meta: MetaTable,
}

pub fn synthesize_corpus(config: &SynthConfig, seed: u64) -> Result<Synthesized> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let weights: Vec<f64> = (0..config.entities)
        .map(|i| 1.0 / ((i + 1) as f64).powf(config.zipf_exponent))
        .collect();
    let zipf = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;

    let meta_items = (0..config.entities)
        .map(|i| {
            let entity_type = EntityType::ALL[rng.random_range(0..EntityType::ALL.len())];
            let gender = if entity_type == EntityType::Person {
                if rng.random_bool(0.5) {
                    Gender::Male
                } else {
                    Gender::Female
                }
            } else {
                Gender::Other
            };
            EntityMeta {
                entity_id: entity_label(i),
                entity_type,
                gender,
            }
        })
        .collect();
    let meta = MetaTable::new(meta_items)?;

    let docs: Vec<Document> = (0..config.documents)
        .map(|i| generate_document(config, &zipf, &mut rng, format!("doc{i:05}")))
        .collect();

    let n_train = ((config.documents as f64) * config.train_fraction).round() as usize;
    let n_dev = ((config.documents as f64) * config.dev_fraction).round() as usize;
    let n_train = n_train.min(config.documents);
    let n_dev = n_dev.min(config.documents - n_train);
    let mut it = docs.into_iter();
    let train: Vec<Document> = it.by_ref().take(n_train).collect();
    let dev: Vec<Document> = it.by_ref().take(n_dev).collect();
    let test: Vec<Document> = it.collect();
    let corpus = Corpus::new(
        CorpusSplit::new(SplitName::Train, train)?,
        CorpusSplit::new(SplitName::Dev, dev)?,
        CorpusSplit::new(SplitName::Test, test)?,
    )?;
    Ok(Synthesized { corpus, meta })
}

fn generate_document(
    config: &SynthConfig,
    zipf: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    doc_id: String,
) -> Document {
    let per_doc = config.entities_per_doc.min(config.entities);
    let want = rng.random_range(1..=per_doc);
    let mut cast: Vec<usize> = Vec::with_capacity(want);
    while cast.len() < want {
        let e = zipf.sample(rng);
        if !cast.contains(&e) {
            cast.push(e);
        }
    }

    let mut tokens = Vec::new();
    let mut mentions = Vec::new();
    let mut mentioned: Vec<usize> = Vec::new();
    let mut seen: HashSet<usize> = HashSet::new();

    let pick = |rng: &mut ChaCha8Rng, mentioned: &Vec<usize>| -> usize {
        let fresh: Vec<usize> = cast.iter().copied().filter(|e| !mentioned.contains(e)).collect();
        if !mentioned.is_empty() && (fresh.is_empty() || rng.random_bool(config.reuse_prob)) {
            mentioned[rng.random_range(0..mentioned.len())]
        } else if !fresh.is_empty() {
            fresh[rng.random_range(0..fresh.len())]
        } else {
            cast[rng.random_range(0..cast.len())]
        }
    };

    let sentences = rng.random_range(config.min_sentences..=config.max_sentences);
    for s in 0..sentences {
        let mut slot = |rng: &mut ChaCha8Rng, tokens: &mut Vec<Token>, mentioned: &mut Vec<usize>, syn: Syn| {
            let e = pick(rng, mentioned);
            let old = !seen.insert(e);
            if !old {
                mentioned.push(e);
            }
            let mut form = planted_form(old, syn);
            if config.noise > 0.0 && rng.random_bool(config.noise) {
                let others: Vec<FormLabel> = FormLabel::ALL.iter().copied().filter(|&f| f != form).collect();
                form = others[rng.random_range(0..others.len())];
            }
            let label = entity_label(e);
            mentions.push(Mention {
                token_index: tokens.len(),
                entity_id: label.clone(),
                form,
                syn,
            });
            tokens.push(Token::entity(label, s));
        };

        slot(rng, &mut tokens, &mut mentioned, Syn::Subject);
        tokens.push(Token::word(VERBS[rng.random_range(0..VERBS.len())], s));
        for _ in 0..rng.random_range(config.min_filler..=config.max_filler) {
            tokens.push(Token::word(FILLERS[rng.random_range(0..FILLERS.len())], s));
        }
        let objects = rng.random_range(config.min_objects..=config.max_objects);
        for k in 0..objects {
            if k > 0 {
                tokens.push(Token::word("and", s));
            }
            tokens.push(Token::word(PREPS[rng.random_range(0..PREPS.len())], s));
            slot(rng, &mut tokens, &mut mentioned, Syn::Object);
        }
        tokens.push(Token::word(".", s));
    }

    Document {
        doc_id,
        tokens,
        mentions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::serialize_split;

    fn all_splits(s: &Synthesized) -> Vec<&CorpusSplit> {
        s.corpus.splits().to_vec()
    }

    fn is_old(doc: &Document, m: usize) -> bool {
        doc.mentions[..m]
            .iter()
            .any(|p| p.entity_id == doc.mentions[m].entity_id)
    }

    #[test]
    fn noise_free_old_subjects_are_pronouns() {
        let s = synthesize_corpus(&SynthConfig::default(), 3).unwrap();
        let mut checked = 0;
        for split in all_splits(&s) {
            for doc in &split.documents {
                for (i, m) in doc.mentions.iter().enumerate() {
                    assert_eq!(m.form, planted_form(is_old(doc, i), m.syn));
                    if is_old(doc, i) && m.syn == Syn::Subject {
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 50, "too few discourse-old subjects: {checked}");
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let cfg = SynthConfig::default();
        let a = synthesize_corpus(&cfg, 11).unwrap();
        let b = synthesize_corpus(&cfg, 11).unwrap();
        for (x, y) in all_splits(&a).into_iter().zip(all_splits(&b)) {
            assert_eq!(serialize_split(x), serialize_split(y));
        }
        let c = synthesize_corpus(&cfg, 12).unwrap();
        assert_ne!(serialize_split(&a.corpus.train), serialize_split(&c.corpus.train));
    }

    #[test]
    fn noise_rate_concentrates() {
        let cfg = SynthConfig {
            documents: 2500,
            noise: 0.1,
            ..SynthConfig::default()
        };
        let s = synthesize_corpus(&cfg, 5).unwrap();
        let (mut total, mut violating) = (0usize, 0usize);
        for split in all_splits(&s) {
            for doc in &split.documents {
                for (i, m) in doc.mentions.iter().enumerate() {
                    total += 1;
                    if m.form != planted_form(is_old(doc, i), m.syn) {
                        violating += 1;
                    }
                }
            }
        }
        assert!(total >= 10_000, "only {total} mentions");
        let rate = violating as f64 / total as f64;
        assert!((0.08..=0.12).contains(&rate), "violation rate {rate}");
    }

    #[test]
    fn rejects_invalid_config() {
        let bad_noise = SynthConfig {
            noise: 1.5,
            ..SynthConfig::default()
        };
        assert!(matches!(synthesize_corpus(&bad_noise, 0), Err(Error::Config(_))));
        let bad_sentences = SynthConfig {
            min_sentences: 3,
            max_sentences: 2,
            ..SynthConfig::default()
        };
        assert!(synthesize_corpus(&bad_sentences, 0).is_err());
    }

    #[test]
    fn split_proportions_default_to_80_10_10() {
        let s = synthesize_corpus(&SynthConfig::default(), 1).unwrap();
        assert_eq!(s.corpus.train.documents.len(), 400);
        assert_eq!(s.corpus.dev.documents.len(), 50);
        assert_eq!(s.corpus.test.documents.len(), 50);
        assert_eq!(s.meta.len(), 16);
    }
}
