//! Loader for whitespace-separated `token v1 .. vD` embedding files.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::vocab::{Vocabulary, PAD, UNK};
use crate::error::{Error, Result};
use crate::numkernel::Tensor2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Vocabulary entries eligible for initialization (reserved ids excluded).
    pub eligible: usize,
    pub covered: usize,
    pub coverage: f64,
    pub duplicates: Vec<String>,
}

/// Parses an embedding file. A leading `count dim` header line is skipped.
/// When a token repeats, the last vector wins and the token is listed.
pub fn parse_embeddings(text: &str, dim: usize) -> Result<(HashMap<String, Vec<f64>>, Vec<String>)> {
    let mut table = HashMap::new();
    let mut duplicates = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let malformed = |message: String| Error::Malformed { line: i + 1, message };
        if fields.len() != dim + 1 {
            return Err(malformed(format!(
                "expected a token and {dim} values, found {} values",
                fields.len() - 1
            )));
        }
        let values = fields[1..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(format!("bad value {f:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if table.insert(fields[0].to_string(), values).is_some() {
            duplicates.push(fields[0].to_string());
        }
    }
    Ok((table, duplicates))
}

/// Overwrites rows of `table` (a `|V| x dim` embedding matrix) for every
/// vocabulary token present in the file; other rows are left as they are.
pub fn load_pretrained_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    table: &mut Tensor2,
) -> Result<CoverageReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_embeddings(&text, vocab, table)
}

pub(crate) fn apply_embeddings(text: &str, vocab: &Vocabulary, table: &mut Tensor2) -> Result<CoverageReport> {
    if table.rows() != vocab.len() {
        return Err(Error::Shape(format!(
            "embedding table has {} rows for a vocabulary of {}",
            table.rows(),
            vocab.len()
        )));
    }
    let (vectors, duplicates) = parse_embeddings(text, table.cols())?;
    for d in &duplicates {
        log::warn!("embedding file repeats token {d:?}; keeping the last vector");
    }
    let mut covered = 0;
    for (id, token) in vocab.tokens().iter().enumerate() {
        if id == PAD || id == UNK {
            continue;
        }
        if let Some(v) = vectors.get(token) {
            table.row_mut(id).copy_from_slice(v);
            covered += 1;
        }
    }
    let eligible = vocab.len() - 2;
    Ok(CoverageReport {
        eligible,
        covered,
        coverage: if eligible == 0 {
            0.0
        } else {
            covered as f64 / eligible as f64
        },
        duplicates,
    })
}
