use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::corpus::{CorpusSplit, Document};
use crate::error::{Error, Result};

/// One mention as model input: token ids before the target, the target
/// entity label, and token ids after it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelInput {
    pub pre_context: Vec<usize>,
    pub target: usize,
    pub pos_context: Vec<usize>,
}

impl ModelInput {
    /// Position of the target in `pre ++ [target] ++ pos`.
    pub fn target_position(&self) -> usize {
        self.pre_context.len()
    }

    /// `pre ++ [target] ++ pos`.
    pub fn concatenated(&self) -> Vec<usize> {
        let mut seq = Vec::with_capacity(self.pre_context.len() + 1 + self.pos_context.len());
        seq.extend_from_slice(&self.pre_context);
        seq.push(self.target);
        seq.extend_from_slice(&self.pos_context);
        seq
    }

    /// Builds the input for mention `m` of `doc`, keeping at most
    /// `max_context` tokens on each side (those nearest the target).
    pub fn from_mention(
        doc: &Document,
        m: usize,
        vocab: &Vocabulary,
        max_context: usize,
        unk_fallback: bool,
    ) -> Result<Self> {
        let mention = doc.mentions.get(m).ok_or(Error::IndexOutOfRange {
            index: m,
            len: doc.mentions.len(),
        })?;
        let ti = mention.token_index;
        let ids = |range: std::ops::Range<usize>| -> Result<Vec<usize>> {
            doc.tokens[range]
                .iter()
                .map(|t| vocab.id(&t.surface, unk_fallback))
                .collect()
        };
        let pre_start = ti.saturating_sub(max_context);
        let pos_end = (ti + 1 + max_context).min(doc.tokens.len());
        Ok(ModelInput {
            pre_context: ids(pre_start..ti)?,
            target: vocab.id(&doc.tokens[ti].surface, unk_fallback)?,
            pos_context: ids(ti + 1..pos_end)?,
        })
    }

    /// Inputs for every mention of `split`, in document then mention order.
    pub fn from_split(
        split: &CorpusSplit,
        vocab: &Vocabulary,
        max_context: usize,
        unk_fallback: bool,
    ) -> Result<Vec<Self>> {
        split
            .mention_refs()
            .map(|(d, m)| Self::from_mention(&split.documents[d], m, vocab, max_context, unk_fallback))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixtures::table1_document, SplitName};

    #[test]
    fn windowing_keeps_nearest_tokens() {
        let doc = table1_document();
        let split = CorpusSplit::new(SplitName::Train, vec![doc.clone()]).unwrap();
        let vocab = Vocabulary::fit(&split).unwrap();
        let full = ModelInput::from_mention(&doc, 4, &vocab, 1000, false).unwrap();
        assert_eq!(full.pre_context.len(), 12);
        assert_eq!(full.pos_context.len(), doc.tokens.len() - 13);
        assert_eq!(full.target, vocab.get("AWH_Engineering_College").unwrap());

        let narrow = ModelInput::from_mention(&doc, 4, &vocab, 3, false).unwrap();
        assert_eq!(narrow.pre_context, full.pre_context[9..]);
        assert_eq!(narrow.pos_context, full.pos_context[..3]);
        assert_eq!(narrow.target_position(), 3);
        assert_eq!(narrow.concatenated()[3], narrow.target);

        let first = ModelInput::from_mention(&doc, 0, &vocab, 5, false).unwrap();
        assert!(first.pre_context.is_empty());
        assert!(ModelInput::from_mention(&doc, 9, &vocab, 5, false).is_err());
    }

    #[test]
    fn unknown_tokens_need_fallback() {
        let doc = table1_document();
        let vocab = Vocabulary::from_tokens(["AWH_Engineering_College"]).unwrap();
        assert!(ModelInput::from_mention(&doc, 0, &vocab, 5, false).is_err());
        let input = ModelInput::from_mention(&doc, 0, &vocab, 5, true).unwrap();
        assert!(input.pos_context.iter().all(|&i| i == super::super::vocab::UNK));
    }
}
