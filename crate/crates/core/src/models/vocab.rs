use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSplit;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token vocabulary shared by words and entity labels. Ids 0 and 1 are
/// reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

impl From<VocabFile> for Vocabulary {
    fn from(f: VocabFile) -> Self {
        let index = f.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            tokens: f.tokens,
            index,
        }
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile { tokens: v.tokens }
    }
}

impl Vocabulary {
    /// Builds from distinct surfaces in sorted order after the reserved ids.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let distinct: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        for t in distinct {
            if t == PAD_TOKEN || t == UNK_TOKEN {
                return Err(Error::Invalid(format!("token {t:?} is reserved")));
            }
            all.push(t);
        }
        Ok(VocabFile { tokens: all }.into())
    }

    /// Every surface in the split, words and entity labels alike.
    pub fn fit(split: &CorpusSplit) -> Result<Self> {
        Self::from_tokens(
            split
                .documents
                .iter()
                .flat_map(|d| d.tokens.iter().map(|t| t.surface.as_str())),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 2
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, mapping out-of-vocabulary tokens to [`UNK`] when
    /// `unk_fallback` is set.
    pub fn id(&self, token: &str, unk_fallback: bool) -> Result<usize> {
        match self.get(token) {
            Some(i) => Ok(i),
            None if unk_fallback => Ok(UNK),
            None => Err(Error::Invalid(format!("unknown token {token:?}"))),
        }
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens.get(id).map(String::as_str).ok_or(Error::UnknownToken(id))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixtures::table1_document, SplitName};

    #[test]
    fn reserved_ids_and_bijection() {
        let split = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
        let v = Vocabulary::fit(&split).unwrap();
        assert_eq!(v.token(PAD).unwrap(), PAD_TOKEN);
        assert_eq!(v.token(UNK).unwrap(), UNK_TOKEN);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.get(t), Some(i));
        }
        assert!(v.get("AWH_Engineering_College").is_some());
        assert_eq!(v.id("never-seen", true).unwrap(), UNK);
        assert!(v.id("never-seen", false).is_err());
        assert!(matches!(v.token(10_000), Err(Error::UnknownToken(10_000))));
    }

    #[test]
    fn serde_round_trip_and_reserved_rejection() {
        let v = Vocabulary::from_tokens(["b", "a", "b"]).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b"]);
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_tokens(["<pad>"]).is_err());
    }
}
