//! Line-delimited JSON corpus files (one document per line) and the JSON
//! metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CorpusSplit, Document, EntityMeta, MetaTable, SplitName};
use crate::error::{Error, Result};

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e.utf8_error()),
        )
    })
}

pub fn parse_corpus(path: impl AsRef<Path>, name: SplitName) -> Result<CorpusSplit> {
    let text = read_utf8(path.as_ref())?;
    parse_corpus_str(&text, name)
}

/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_corpus_str(text: &str, name: SplitName) -> Result<CorpusSplit> {
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        documents.push(doc);
    }
    CorpusSplit::new(name, documents)
}

pub fn serialize_split(split: &CorpusSplit) -> String {
    let mut out = String::new();
    for doc in &split.documents {
        // Document serialization cannot fail: all keys are strings.
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, split: &CorpusSplit) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(serialize_split(split).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn parse_metadata(path: impl AsRef<Path>) -> Result<MetaTable> {
    let text = read_utf8(path.as_ref())?;
    parse_metadata_str(&text)
}

pub fn parse_metadata_str(text: &str) -> Result<MetaTable> {
    let items: Vec<EntityMeta> = serde_json::from_str(text)?;
    MetaTable::new(items)
}

pub fn write_metadata(path: impl AsRef<Path>, table: &MetaTable) -> Result<()> {
    let path = path.as_ref();
    let items: Vec<&EntityMeta> = table.iter().collect();
    let text = serde_json::to_string_pretty(&items)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::table1_document;
    use crate::corpus::{FormLabel, Mention, Syn, Token};
    use proptest::prelude::*;

    #[test]
    fn table1_line_parses() {
        let split = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
        let text = serialize_split(&split);
        assert_eq!(text.lines().count(), 1);
        let parsed = parse_corpus_str(&text, SplitName::Train).unwrap();
        let doc = &parsed.documents[0];
        assert_eq!(doc.sentence_count(), 3);
        assert_eq!(doc.mentions.len(), 9);
    }

    #[test]
    fn zero_mentions_accepted() {
        let line = r#"{"doc_id":"d","tokens":[{"kind":"word","surface":"hi","sentence_index":0}],"mentions":[]}"#;
        let split = parse_corpus_str(line, SplitName::Dev).unwrap();
        assert!(split.documents[0].mentions.is_empty());
    }

    #[test]
    fn mention_on_word_token_reports_doc() {
        let line = r#"{"doc_id":"bad","tokens":[{"kind":"word","surface":"hi","sentence_index":0}],"mentions":[{"token_index":0,"entity_id":"X","form":"pronoun","syn":"subject"}]}"#;
        let err = parse_corpus_str(line, SplitName::Dev).unwrap_err();
        match err {
            Error::Invariant { doc_id, message, .. } => {
                assert_eq!(doc_id, "bad");
                assert_eq!(message, "mention on non-entity token");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "\n{\"doc_id\":\"a\",\"tokens\":[],\"mentions\":[]}\n{not json\n";
        match parse_corpus_str(text, SplitName::Train).unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let line = r#"{"doc_id":"a","tokens":[],"mentions":[]}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            parse_corpus_str(&text, SplitName::Train),
            Err(Error::DuplicateDoc(_))
        ));
    }

    #[test]
    fn metadata_parses_and_rejects_duplicates() {
        let ok = r#"[{"entity_id":"India","entity_type":"Location","gender":"other"}]"#;
        assert_eq!(parse_metadata_str(ok).unwrap().len(), 1);
        let dup = r#"[{"entity_id":"A","entity_type":"Person","gender":"male"},{"entity_id":"A","entity_type":"Person","gender":"female"}]"#;
        assert!(parse_metadata_str(dup).is_err());
    }

    fn arb_document(id: usize) -> impl Strategy<Value = Document> {
        let tok = (any::<bool>(), 0usize..4, 0usize..3);
        prop::collection::vec(tok, 0..20).prop_flat_map(move |raw| {
            let mut sentence = 0;
            let tokens: Vec<Token> = raw
                .iter()
                .map(|&(ent, e, bump)| {
                    if bump == 0 {
                        sentence += 1;
                    }
                    if ent {
                        Token::entity(format!("E{e}"), sentence)
                    } else {
                        Token::word(format!("w{e}"), sentence)
                    }
                })
                .collect();
            let base = tokens.first().map_or(0, |t| t.sentence_index);
            let tokens: Vec<Token> = tokens
                .into_iter()
                .map(|mut t| {
                    t.sentence_index -= base;
                    t
                })
                .collect();
            let entity_positions: Vec<usize> = tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.is_entity())
                .map(|(i, _)| i)
                .collect();
            let n = entity_positions.len();
            (
                Just(tokens),
                Just(entity_positions),
                prop::collection::vec((any::<bool>(), 0usize..4, any::<bool>()), n),
            )
                .prop_map(move |(tokens, positions, picks)| {
                    let mentions = positions
                        .iter()
                        .zip(picks)
                        .filter(|(_, (keep, _, _))| *keep)
                        .map(|(&i, (_, f, subj))| Mention {
                            token_index: i,
                            entity_id: tokens[i].entity_id.clone().unwrap(),
                            form: FormLabel::ALL[f],
                            syn: if subj { Syn::Subject } else { Syn::Object },
                        })
                        .collect();
                    Document {
                        doc_id: format!("doc{id}"),
                        tokens,
                        mentions,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn parse_serialize_round_trips(a in arb_document(0), b in arb_document(1)) {
            let split = CorpusSplit::new(SplitName::Test, vec![a, b]).unwrap();
            let text = serialize_split(&split);
            let back = parse_corpus_str(&text, SplitName::Test).unwrap();
            prop_assert_eq!(back, split);
        }
    }
}
