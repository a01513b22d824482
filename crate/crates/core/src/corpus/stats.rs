use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::{CorpusSplit, FormLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub sentences_per_document: f64,
    pub mentions: usize,
    pub first_mentions: usize,
    pub first_mention_fraction: f64,
    pub form_counts: BTreeMap<String, usize>,
    pub entity_mention_counts: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("documents              {}\n", self.documents));
        out.push_str(&format!("sentences/document     {:.4}\n", self.sentences_per_document));
        out.push_str(&format!("mentions               {}\n", self.mentions));
        out.push_str(&format!("first mentions         {}\n", self.first_mentions));
        out.push_str(&format!("first-mention fraction {:.4}\n", self.first_mention_fraction));
        for (form, n) in &self.form_counts {
            out.push_str(&format!("form {form:<17} {n}\n"));
        }
        out.push_str(&format!(
            "distinct entities      {}\n",
            self.entity_mention_counts.len()
        ));
        out
    }
}

pub fn corpus_stats(split: &CorpusSplit) -> Result<CorpusStats> {
    if split.documents.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut sentences = 0usize;
    let mut mentions = 0usize;
    let mut first_mentions = 0usize;
    let mut form_counts: BTreeMap<String, usize> = FormLabel::ALL.iter().map(|f| (f.name().to_string(), 0)).collect();
    let mut entity_mention_counts: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &split.documents {
        sentences += doc.sentence_count();
        let mut seen = HashSet::new();
        for m in &doc.mentions {
            mentions += 1;
            if seen.insert(m.entity_id.as_str()) {
                first_mentions += 1;
            }
            *form_counts.get_mut(m.form.name()).expect("all forms present") += 1;
            *entity_mention_counts.entry(m.entity_id.clone()).or_default() += 1;
        }
    }
    let first_mention_fraction = if mentions == 0 {
        0.0
    } else {
        first_mentions as f64 / mentions as f64
    };
    Ok(CorpusStats {
        documents: split.documents.len(),
        sentences_per_document: sentences as f64 / split.documents.len() as f64,
        mentions,
        first_mentions,
        first_mention_fraction,
        form_counts,
        entity_mention_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::table1_document;
    use crate::corpus::{Document, Mention, SplitName, Syn, Token};

    #[test]
    fn table1_first_mention_fraction() {
        let split = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
        let s = corpus_stats(&split).unwrap();
        assert_eq!(s.documents, 1);
        assert_eq!(s.sentences_per_document, 3.0);
        assert_eq!(s.mentions, 9);
        assert_eq!(s.first_mentions, 6);
        assert!((s.first_mention_fraction - 6.0 / 9.0).abs() < 1e-15);
        assert_eq!(s.entity_mention_counts["AWH_Engineering_College"], 2);
        assert_eq!(s.entity_mention_counts["Kochi"], 1);
        assert_eq!(s.form_counts["description"], 1);
    }

    #[test]
    fn single_mention_is_a_first_mention() {
        let doc = Document {
            doc_id: "one".into(),
            tokens: vec![Token::entity("E", 0)],
            mentions: vec![Mention {
                token_index: 0,
                entity_id: "E".into(),
                form: FormLabel::ProperName,
                syn: Syn::Subject,
            }],
        };
        let split = CorpusSplit::new(SplitName::Train, vec![doc]).unwrap();
        assert_eq!(corpus_stats(&split).unwrap().first_mention_fraction, 1.0);
    }

    #[test]
    fn empty_split_is_an_error() {
        let split = CorpusSplit::new(SplitName::Train, vec![]).unwrap();
        assert!(matches!(corpus_stats(&split), Err(Error::EmptySplit)));
    }
}
