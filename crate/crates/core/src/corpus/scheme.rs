use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FormLabel;
use crate::error::Error;

/// How the four referential forms collapse into `K` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelScheme {
    #[serde(rename = "4-way")]
    FourWay,
    #[serde(rename = "3-way")]
    ThreeWay,
    #[serde(rename = "2-way")]
    TwoWay,
}

impl LabelScheme {
    pub const ALL: [LabelScheme; 3] = [LabelScheme::FourWay, LabelScheme::ThreeWay, LabelScheme::TwoWay];

    pub fn num_classes(self) -> usize {
        match self {
            LabelScheme::FourWay => 4,
            LabelScheme::ThreeWay => 3,
            LabelScheme::TwoWay => 2,
        }
    }

    pub fn class_of(self, form: FormLabel) -> usize {
        use FormLabel::*;
        match (self, form) {
            (LabelScheme::FourWay, Demonstrative) => 0,
            (LabelScheme::FourWay, Description) => 1,
            (LabelScheme::FourWay, ProperName) => 2,
            (LabelScheme::FourWay, Pronoun) => 3,
            (LabelScheme::ThreeWay, Demonstrative | Description) => 0,
            (LabelScheme::ThreeWay, ProperName) => 1,
            (LabelScheme::ThreeWay, Pronoun) => 2,
            (LabelScheme::TwoWay, Pronoun) => 1,
            (LabelScheme::TwoWay, _) => 0,
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            LabelScheme::FourWay => &["demonstrative", "description", "proper_name", "pronoun"],
            LabelScheme::ThreeWay => &["description", "proper_name", "pronoun"],
            LabelScheme::TwoWay => &["non_pronominal", "pronominal"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelScheme::FourWay => "4-way",
            LabelScheme::ThreeWay => "3-way",
            LabelScheme::TwoWay => "2-way",
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "4" | "4-way" | "4way" => Ok(LabelScheme::FourWay),
            "3" | "3-way" | "3way" => Ok(LabelScheme::ThreeWay),
            "2" | "2-way" | "2way" => Ok(LabelScheme::TwoWay),
            other => Err(Error::Config(format!("unknown label scheme {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mappings_are_total_and_surjective() {
        for scheme in LabelScheme::ALL {
            let mut hit = vec![false; scheme.num_classes()];
            for form in FormLabel::ALL {
                let c = scheme.class_of(form);
                assert!(c < scheme.num_classes());
                hit[c] = true;
            }
            assert!(hit.iter().all(|&h| h), "{scheme} not surjective");
            assert_eq!(scheme.class_names().len(), scheme.num_classes());
        }
    }

    #[test]
    fn three_way_merges_demonstratives_into_descriptions() {
        let s = LabelScheme::ThreeWay;
        assert_eq!(s.class_of(FormLabel::Demonstrative), s.class_of(FormLabel::Description));
        assert_ne!(s.class_of(FormLabel::ProperName), s.class_of(FormLabel::Pronoun));
    }

    #[test]
    fn two_way_is_pronominalisation() {
        let s = LabelScheme::TwoWay;
        assert_eq!(s.class_of(FormLabel::Pronoun), 1);
        for f in [FormLabel::Demonstrative, FormLabel::Description, FormLabel::ProperName] {
            assert_eq!(s.class_of(f), 0);
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("2-way".parse::<LabelScheme>().unwrap(), LabelScheme::TwoWay);
        assert_eq!("4".parse::<LabelScheme>().unwrap(), LabelScheme::FourWay);
        assert!("5".parse::<LabelScheme>().is_err());
    }
}
