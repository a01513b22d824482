use serde::{Deserialize, Serialize};

use crate::corpus::{EntityType, Gender, Syn};

/// A closed label set with a stable index order.
pub trait Categorical: Copy + Eq + 'static {
    const NAMES: &'static [&'static str];

    fn index(self) -> usize;

    fn from_index(i: usize) -> Self;

    fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    fn cardinality() -> usize {
        Self::NAMES.len()
    }
}

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl Categorical for $name {
            const NAMES: &'static [&'static str] = &[$($label),+];

            fn index(self) -> usize {
                self as usize
            }

            fn from_index(i: usize) -> Self {
                const ALL: &[$name] = &[$($name::$variant),+];
                ALL[i]
            }
        }
    };
}

categorical!(DisStat {
    DiscourseNew => "discourse_new",
    DiscourseOld => "discourse_old",
});

categorical!(SenStat {
    SentenceNew => "sentence_new",
    SentenceOld => "sentence_old",
});

categorical!(
    /// Sentence distance to the nearest antecedent.
    DistAnt {
        SameSentence => "same_sentence",
        OneAway => "one_away",
        MoreThanOne => "more_than_one",
        FirstMention => "first_mention",
    }
);

categorical!(
    /// Whether the immediately preceding mention is coreferent.
    IntRef {
        FirstMention => "first_mention",
        PreviousSame => "previous_same",
        PreviousDifferent => "previous_different",
    }
);

categorical!(Prominence {
    Prominent => "prominent",
    NotProminent => "not_prominent",
});

categorical!(
    /// Corpus-wide mention-count bucket: `[0,50) [50,150) [150,290) [290,inf)`.
    MetaPro {
        B0To50 => "b0_50",
        B50To150 => "b50_150",
        B150To290 => "b150_290",
        B290Up => "b290_inf",
    }
);

impl Categorical for Syn {
    const NAMES: &'static [&'static str] = &["subject", "object"];

    fn index(self) -> usize {
        match self {
            Syn::Subject => 0,
            Syn::Object => 1,
        }
    }

    fn from_index(i: usize) -> Self {
        [Syn::Subject, Syn::Object][i]
    }
}

impl Categorical for EntityType {
    const NAMES: &'static [&'static str] = &["Person", "Organisation", "Location", "Number", "Other"];

    fn index(self) -> usize {
        self as usize
    }

    fn from_index(i: usize) -> Self {
        EntityType::ALL[i]
    }
}

impl Categorical for Gender {
    const NAMES: &'static [&'static str] = &["male", "female", "other"];

    fn index(self) -> usize {
        self as usize
    }

    fn from_index(i: usize) -> Self {
        Gender::ALL[i]
    }
}
