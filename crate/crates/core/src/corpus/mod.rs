//! Delexicalised corpus: documents of word and entity tokens, annotated
//! referring-expression slots, label schemes and the entity metadata sidecar.

mod io;
mod scheme;
mod stats;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    parse_corpus, parse_corpus_str, parse_metadata, parse_metadata_str, serialize_split, write_corpus, write_metadata,
};
pub use scheme::LabelScheme;
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{entity_label, planted_form, synthesize_corpus, SynthConfig, Synthesized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
    pub sentence_index: usize,
}

impl Token {
    pub fn word(surface: impl Into<String>, sentence_index: usize) -> Self {
        Token {
            kind: TokenKind::Word,
            surface: surface.into(),
            entity_id: None,
            sentence_index,
        }
    }

    /// Entity token whose surface is the delexicalised label itself.
    pub fn entity(label: impl Into<String>, sentence_index: usize) -> Self {
        let label = label.into();
        Token {
            kind: TokenKind::Entity,
            surface: label.clone(),
            entity_id: Some(label),
            sentence_index,
        }
    }

    pub fn is_entity(&self) -> bool {
        self.kind == TokenKind::Entity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormLabel {
    Demonstrative,
    Description,
    ProperName,
    Pronoun,
}

impl FormLabel {
    pub const ALL: [FormLabel; 4] = [
        FormLabel::Demonstrative,
        FormLabel::Description,
        FormLabel::ProperName,
        FormLabel::Pronoun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormLabel::Demonstrative => "demonstrative",
            FormLabel::Description => "description",
            FormLabel::ProperName => "proper_name",
            FormLabel::Pronoun => "pronoun",
        }
    }
}

impl fmt::Display for FormLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Syn {
    Subject,
    Object,
}

impl Syn {
    pub fn name(self) -> &'static str {
        match self {
            Syn::Subject => "subject",
            Syn::Object => "object",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub token_index: usize,
    pub entity_id: String,
    pub form: FormLabel,
    pub syn: Syn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub mentions: Vec<Mention>,
}

impl Document {
    /// Checks every token and mention invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let id = self.doc_id.as_str();
        let mut expected_sentence = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            let field = format!("tokens[{i}]");
            if tok.surface.is_empty() {
                return Err(Error::invariant(id, field, "empty surface"));
            }
            if tok.surface.chars().any(char::is_whitespace) {
                return Err(Error::invariant(id, field, "surface contains whitespace"));
            }
            match (tok.kind, &tok.entity_id) {
                (TokenKind::Entity, None) => return Err(Error::invariant(id, field, "entity token without entity_id")),
                (TokenKind::Word, Some(_)) => return Err(Error::invariant(id, field, "word token with entity_id")),
                _ => {}
            }
            if i == 0 && tok.sentence_index != 0 {
                return Err(Error::invariant(id, field, "sentence_index must start at 0"));
            }
            if tok.sentence_index < expected_sentence {
                return Err(Error::invariant(id, field, "sentence_index decreases"));
            }
            expected_sentence = tok.sentence_index;
        }
        let mut prev: Option<usize> = None;
        for (j, m) in self.mentions.iter().enumerate() {
            let field = format!("mentions[{j}]");
            if let Some(p) = prev {
                if m.token_index <= p {
                    return Err(Error::invariant(
                        id,
                        field,
                        "mentions not strictly increasing by token_index",
                    ));
                }
            }
            prev = Some(m.token_index);
            let tok = self
                .tokens
                .get(m.token_index)
                .ok_or_else(|| Error::invariant(id, field.clone(), "token_index out of range"))?;
            if !tok.is_entity() {
                return Err(Error::invariant(id, field, "mention on non-entity token"));
            }
            if tok.entity_id.as_deref() != Some(m.entity_id.as_str()) {
                return Err(Error::invariant(
                    id,
                    field,
                    "entity_id differs from the token's entity_id",
                ));
            }
        }
        Ok(())
    }

    pub fn sentence_count(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.sentence_index + 1)
    }

    pub fn mention_sentence(&self, m: usize) -> usize {
        self.tokens[self.mentions[m].token_index].sentence_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub documents: Vec<Document>,
}

impl CorpusSplit {
    pub fn new(name: SplitName, documents: Vec<Document>) -> Result<Self> {
        let split = CorpusSplit { name, documents };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for doc in &self.documents {
            doc.validate()?;
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::DuplicateDoc(doc.doc_id.clone()));
            }
        }
        Ok(())
    }

    pub fn mention_count(&self) -> usize {
        self.documents.iter().map(|d| d.mentions.len()).sum()
    }

    /// `(document index, mention index)` for every mention in corpus order.
    pub fn mention_refs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.documents
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| (0..doc.mentions.len()).map(move |m| (d, m)))
    }
}

/// Train/dev/test splits loaded together; doc ids are unique across them.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: CorpusSplit,
    pub dev: CorpusSplit,
    pub test: CorpusSplit,
}

impl Corpus {
    pub fn new(train: CorpusSplit, dev: CorpusSplit, test: CorpusSplit) -> Result<Self> {
        let mut seen = HashSet::new();
        for split in [&train, &dev, &test] {
            split.validate()?;
            for doc in &split.documents {
                if !seen.insert(doc.doc_id.clone()) {
                    return Err(Error::DuplicateDoc(doc.doc_id.clone()));
                }
            }
        }
        Ok(Corpus { train, dev, test })
    }

    pub fn splits(&self) -> [&CorpusSplit; 3] {
        [&self.train, &self.dev, &self.test]
    }

    pub fn split(&self, name: SplitName) -> &CorpusSplit {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityType {
    Person,
    Organisation,
    Location,
    Number,
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::Person,
        EntityType::Organisation,
        EntityType::Location,
        EntityType::Number,
        EntityType::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Person => "Person",
            EntityType::Organisation => "Organisation",
            EntityType::Location => "Location",
            EntityType::Number => "Number",
            EntityType::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Other,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Other];

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMeta {
    pub entity_id: String,
    pub entity_type: EntityType,
    pub gender: Gender,
}

/// Entity metadata keyed by id; lookups for unknown entities fall back to
/// `(Other, other)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetaTable {
    entries: BTreeMap<String, EntityMeta>,
}

impl MetaTable {
    pub fn new(items: Vec<EntityMeta>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for item in items {
            if entries.contains_key(&item.entity_id) {
                return Err(Error::Invalid(format!(
                    "duplicate entity_id {} in metadata",
                    item.entity_id
                )));
            }
            entries.insert(item.entity_id.clone(), item);
        }
        Ok(MetaTable { entries })
    }

    pub fn lookup(&self, entity_id: &str) -> (EntityType, Gender) {
        self.entries
            .get(entity_id)
            .map_or((EntityType::Other, Gender::Other), |m| (m.entity_type, m.gender))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityMeta> {
        self.entries.values()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The delexicalised AWH Engineering College text, three sentences.
    pub fn table1_document() -> Document {
        let text = [
            (0, "AWH_Engineering_College", true),
            (0, "is", false),
            (0, "in", false),
            (0, "\"Kuttikkattoor\"", true),
            (0, ",", false),
            (0, "India", true),
            (0, "in", false),
            (0, "the", false),
            (0, "state", false),
            (0, "of", false),
            (0, "Kerala", true),
            (0, ".", false),
            (1, "AWH_Engineering_College", true),
            (1, "has", false),
            (1, "250", false),
            (1, "employees", false),
            (1, "and", false),
            (1, "Kerala", true),
            (1, "is", false),
            (1, "ruled", false),
            (1, "by", false),
            (1, "Kochi", true),
            (1, ".", false),
            (2, "The", false),
            (2, "Ganges", true),
            (2, "River", false),
            (2, "is", false),
            (2, "also", false),
            (2, "found", false),
            (2, "in", false),
            (2, "India", true),
            (2, ".", false),
        ];
        let syn = [
            Syn::Subject,
            Syn::Object,
            Syn::Object,
            Syn::Object,
            Syn::Subject,
            Syn::Subject,
            Syn::Object,
            Syn::Subject,
            Syn::Object,
        ];
        let form = [
            FormLabel::ProperName,
            FormLabel::ProperName,
            FormLabel::ProperName,
            FormLabel::ProperName,
            FormLabel::Description,
            FormLabel::ProperName,
            FormLabel::ProperName,
            FormLabel::ProperName,
            FormLabel::ProperName,
        ];
        let tokens: Vec<Token> = text
            .iter()
            .map(|&(s, w, ent)| if ent { Token::entity(w, s) } else { Token::word(w, s) })
            .collect();
        let mentions = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_entity())
            .zip(syn.iter().zip(form.iter()))
            .map(|((i, t), (&syn, &form))| Mention {
                token_index: i,
                entity_id: t.entity_id.clone().unwrap(),
                form,
                syn,
            })
            .collect();
        Document {
            doc_id: "awh".into(),
            tokens,
            mentions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::table1_document;
    use super::*;

    #[test]
    fn table1_has_three_sentences_and_nine_mentions() {
        let doc = table1_document();
        doc.validate().unwrap();
        assert_eq!(doc.sentence_count(), 3);
        let per_sentence: Vec<Vec<&str>> = (0..3)
            .map(|s| {
                doc.mentions
                    .iter()
                    .filter(|m| doc.tokens[m.token_index].sentence_index == s)
                    .map(|m| m.entity_id.as_str())
                    .collect()
            })
            .collect();
        assert_eq!(
            per_sentence[0],
            ["AWH_Engineering_College", "\"Kuttikkattoor\"", "India", "Kerala"]
        );
        assert_eq!(per_sentence[1], ["AWH_Engineering_College", "Kerala", "Kochi"]);
        assert_eq!(per_sentence[2], ["Ganges", "India"]);
    }

    #[test]
    fn mention_on_word_token_is_rejected() {
        let mut doc = table1_document();
        doc.mentions[0].token_index = 1;
        let err = doc.validate().unwrap_err().to_string();
        assert!(err.contains("mention on non-entity token"), "{err}");
    }

    #[test]
    fn unsorted_mentions_are_rejected() {
        let mut doc = table1_document();
        doc.mentions.swap(0, 1);
        assert!(doc.validate().is_err());
    }

    #[test]
    fn decreasing_sentence_index_is_rejected() {
        let mut doc = table1_document();
        doc.tokens[5].sentence_index = 1;
        doc.tokens[6].sentence_index = 0;
        assert!(doc.validate().is_err());
    }

    #[test]
    fn entity_id_must_match_token() {
        let mut doc = table1_document();
        doc.mentions[2].entity_id = "Kerala".into();
        assert!(doc.validate().is_err());
    }

    #[test]
    fn duplicate_doc_ids_across_splits() {
        let a = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
        let b = CorpusSplit::new(SplitName::Dev, vec![table1_document()]).unwrap();
        let c = CorpusSplit::new(SplitName::Test, vec![]).unwrap();
        assert!(matches!(Corpus::new(a, b, c), Err(Error::DuplicateDoc(_))));
    }

    #[test]
    fn metadata_defaults_to_other() {
        let table = MetaTable::new(vec![EntityMeta {
            entity_id: "India".into(),
            entity_type: EntityType::Location,
            gender: Gender::Other,
        }])
        .unwrap();
        assert_eq!(table.lookup("India"), (EntityType::Location, Gender::Other));
        assert_eq!(table.lookup("Kochi"), (EntityType::Other, Gender::Other));
    }
}
