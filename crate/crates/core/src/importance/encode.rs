//! One-hot encoding of feature vectors into a dense design matrix whose
//! columns are grouped by source feature.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityType, Gender, LabelScheme, Syn};
use crate::error::{Error, Result};
use crate::features::{Categorical, DisStat, DistAnt, FeatureVector, IntRef, MetaPro, Prominence, SenStat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    Syn,
    Entity,
    Gender,
    DisStat,
    SenStat,
    DistAnt,
    DistAntW,
    Sent1,
    MetaPro,
    GloPro,
    IntRef,
    LocPro,
}

impl Feature {
    pub const ALL: [Feature; 12] = [
        Feature::Syn,
        Feature::Entity,
        Feature::Gender,
        Feature::DisStat,
        Feature::SenStat,
        Feature::DistAnt,
        Feature::DistAntW,
        Feature::Sent1,
        Feature::MetaPro,
        Feature::GloPro,
        Feature::IntRef,
        Feature::LocPro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Syn => "Syn",
            Feature::Entity => "Entity",
            Feature::Gender => "Gender",
            Feature::DisStat => "DisStat",
            Feature::SenStat => "SenStat",
            Feature::DistAnt => "DistAnt",
            Feature::DistAntW => "DistAnt_W",
            Feature::Sent1 => "Sent_1",
            Feature::MetaPro => "MetaPro",
            Feature::GloPro => "GloPro",
            Feature::IntRef => "IntRef",
            Feature::LocPro => "LocPro",
        }
    }

    pub fn value_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Feature::Syn => Syn::NAMES,
            Feature::Entity => EntityType::NAMES,
            Feature::Gender => Gender::NAMES,
            Feature::DisStat => DisStat::NAMES,
            Feature::SenStat => SenStat::NAMES,
            Feature::DistAnt => DistAnt::NAMES,
            Feature::DistAntW => &["q0", "q1", "q2", "q3", "q4"],
            Feature::Sent1 => &["false", "true"],
            Feature::MetaPro => MetaPro::NAMES,
            Feature::GloPro | Feature::LocPro => Prominence::NAMES,
            Feature::IntRef => IntRef::NAMES,
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn cardinality(self) -> usize {
        self.value_names().len()
    }

    pub fn value(self, f: &FeatureVector) -> usize {
        match self {
            Feature::Syn => f.syn.index(),
            Feature::Entity => f.entity_type.index(),
            Feature::Gender => f.gender.index(),
            Feature::DisStat => f.dis_stat.index(),
            Feature::SenStat => f.sen_stat.index(),
            Feature::DistAnt => f.dist_ant.index(),
            Feature::DistAntW => usize::from(f.dist_ant_w),
            Feature::Sent1 => usize::from(f.sent_1),
            Feature::MetaPro => f.meta_pro.index(),
            Feature::GloPro => f.glo_pro.index(),
            Feature::IntRef => f.int_ref.index(),
            Feature::LocPro => f.loc_pro.index(),
        }
    }

    /// The feature-based classifier's inputs for each label scheme.
    pub fn for_scheme(scheme: LabelScheme) -> Vec<Feature> {
        let base = [
            Feature::Syn,
            Feature::Entity,
            Feature::Gender,
            Feature::DisStat,
            Feature::SenStat,
            Feature::DistAnt,
            Feature::DistAntW,
            Feature::Sent1,
            Feature::MetaPro,
            Feature::GloPro,
        ];
        let drop = match scheme {
            LabelScheme::TwoWay => Some(Feature::SenStat),
            LabelScheme::ThreeWay => Some(Feature::DistAntW),
            LabelScheme::FourWay => None,
        };
        base.into_iter().filter(|&f| Some(f) != drop).collect()
    }

    /// The eight features that double as probing tasks.
    pub fn probing() -> Vec<Feature> {
        vec![
            Feature::DisStat,
            Feature::SenStat,
            Feature::Syn,
            Feature::DistAnt,
            Feature::IntRef,
            Feature::LocPro,
            Feature::GloPro,
            Feature::MetaPro,
        ]
    }
}

impl std::str::FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown feature {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub columns: Range<usize>,
}

/// Row-major design matrix plus the column groups that form each source
/// feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTable {
    pub column_names: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub rows: Vec<Vec<f64>>,
}

impl EncodedTable {
    /// Builds a table from raw columns; groups must tile `0..width` in order.
    pub fn new(column_names: Vec<String>, groups: Vec<ColumnGroup>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = column_names.len();
        let mut next = 0;
        for g in &groups {
            if g.columns.start != next || g.columns.end <= g.columns.start {
                return Err(Error::Shape(format!("group {} does not tile the columns", g.name)));
            }
            next = g.columns.end;
        }
        if next != width {
            return Err(Error::Shape("column groups do not cover every column".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {width}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("row {i} has a non-finite encoding")));
            }
        }
        Ok(EncodedTable {
            column_names,
            groups,
            rows,
        })
    }

    /// One column per raw column, each its own group.
    pub fn ungrouped(column_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let groups = column_names
            .iter()
            .enumerate()
            .map(|(i, n)| ColumnGroup {
                name: n.clone(),
                columns: i..i + 1,
            })
            .collect();
        Self::new(column_names, groups, rows)
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    pub fn select(&self, indices: &[usize]) -> EncodedTable {
        EncodedTable {
            column_names: self.column_names.clone(),
            groups: self.groups.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// One-hot encodes `features` of every vector.
pub fn encode<'a>(features: &[Feature], vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Result<EncodedTable> {
    let mut column_names = Vec::new();
    let mut groups = Vec::new();
    for f in features {
        let start = column_names.len();
        column_names.extend(f.value_names().into_iter().map(|v| format!("{}={v}", f.name())));
        groups.push(ColumnGroup {
            name: f.name().to_string(),
            columns: start..column_names.len(),
        });
    }
    let rows = vectors
        .into_iter()
        .map(|v| {
            let mut row = vec![0.0; column_names.len()];
            for (f, g) in features.iter().zip(&groups) {
                row[g.columns.start + f.value(v)] = 1.0;
            }
            row
        })
        .collect();
    EncodedTable::new(column_names, groups, rows)
}
