use std::io::Write;

use super::{Categorical, FeatureVector};
use crate::error::{Error, Result};

pub const FEATURE_COLUMNS: [&str; 14] = [
    "doc_id",
    "mention_index",
    "dis_stat",
    "sen_stat",
    "syn",
    "dist_ant",
    "int_ref",
    "loc_pro",
    "glo_pro",
    "meta_pro",
    "dist_ant_w",
    "sent_1",
    "entity_type",
    "gender",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub doc_id: String,
    pub mention_index: usize,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &FeatureVector> {
        self.rows.iter().map(|r| &r.features)
    }
}

fn record(row: &FeatureRow) -> [String; 14] {
    let f = &row.features;
    [
        row.doc_id.clone(),
        row.mention_index.to_string(),
        f.dis_stat.name().into(),
        f.sen_stat.name().into(),
        f.syn.name().into(),
        f.dist_ant.name().into(),
        f.int_ref.name().into(),
        f.loc_pro.name().into(),
        f.glo_pro.name().into(),
        f.meta_pro.name().into(),
        f.dist_ant_w.to_string(),
        f.sent_1.to_string(),
        Categorical::name(f.entity_type).into(),
        Categorical::name(f.gender).into(),
    ]
}

/// Tab-separated export with a header row.
pub fn write_feature_table<W: Write>(table: &FeatureTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    let to_err = |e: csv::Error| Error::Invalid(format!("feature table export: {e}"));
    w.write_record(FEATURE_COLUMNS).map_err(to_err)?;
    for row in &table.rows {
        w.write_record(record(row)).map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::Invalid(format!("feature table export: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::table1_document;
    use crate::corpus::{CorpusSplit, MetaTable, SplitName};
    use crate::features::{extract_all, fit_quantile_bounds, MentionCounts};

    #[test]
    fn tsv_has_header_and_one_row_per_mention() {
        let split = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
        let counts = MentionCounts::from_splits([&split]);
        let bounds = fit_quantile_bounds(&split).unwrap();
        let table = extract_all(&split, &MetaTable::default(), &counts, &bounds).unwrap();
        let mut buf = Vec::new();
        write_feature_table(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0].split('\t').count(), 14);
        assert!(lines[5].starts_with("awh\t4\tdiscourse_old\tsentence_new\tsubject\tone_away"));
    }
}
