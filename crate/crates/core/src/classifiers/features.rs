use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FileRecord, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::json;
use crate::treelstm::{forward_root, TreeLstmModel};

pub const FEATURES_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// `project/version/file_id` of the source record.
    pub key: String,
    pub label: Option<Label>,
    pub vector: Vec<f64>,
}

/// One finite vector of length `dim` per file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, rows: Vec<FeatureRow>) -> Result<Self> {
        for r in &rows {
            if r.vector.len() != dim {
                return Err(Error::schema(&r.key, format!("vector length {} != {dim}", r.vector.len())));
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::schema(&r.key, "non-finite feature"));
            }
        }
        Ok(FeatureMatrix { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn vectors(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.vector.as_slice()).collect()
    }

    /// Labels of every row; errors naming the first unlabeled row.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.rows
            .iter()
            .map(|r| r.label.ok_or_else(|| Error::Input(format!("{} has no defect label", r.key))))
            .collect()
    }
}

#[derive(Deserialize)]
struct FeatureDocIn {
    format_version: u64,
    dim: usize,
    rows: Vec<FeatureRow>,
}

#[derive(Serialize)]
struct FeatureDocOut<'a> {
    format_version: u64,
    #[serde(flatten)]
    features: &'a FeatureMatrix,
}

pub fn write_features(features: &FeatureMatrix) -> Result<String> {
    json::to_string(&FeatureDocOut {
        format_version: FEATURES_FORMAT_VERSION,
        features,
    })
}

pub fn read_features(text: &str) -> Result<FeatureMatrix> {
    let doc: FeatureDocIn = json::from_str(text)?;
    if doc.format_version != FEATURES_FORMAT_VERSION {
        return Err(Error::schema("format_version", format!("unsupported feature format {}", doc.format_version)));
    }
    FeatureMatrix::new(doc.dim, doc.rows)
}

/// Root hidden state of every record under a frozen model, in input order.
pub fn featurize_corpus(records: &[FileRecord], model: &TreeLstmModel) -> Result<FeatureMatrix> {
    let rows = records
        .par_iter()
        .map(|r| {
            Ok(FeatureRow {
                key: r.key(),
                label: r.label,
                vector: forward_root(r, model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(model.hidden_dim(), rows)
}

/// Two-bin bag of words: coordinate `v` is 1 when token `v` labels at least
/// `threshold` nodes of the file.
pub fn bow_featurize(records: &[FileRecord], vocab: &Vocabulary, threshold: usize) -> Result<FeatureMatrix> {
    if threshold < 1 {
        return Err(Error::Config("bag-of-words threshold must be at least 1".into()));
    }
    let rows = records
        .par_iter()
        .map(|r| {
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for label in r.tree.labels() {
                *counts.entry(vocab.index_of(label)).or_default() += 1;
            }
            let mut vector = vec![0.0; vocab.len()];
            for (i, n) in counts {
                if n >= threshold {
                    vector[i] = 1.0;
                }
            }
            FeatureRow {
                key: r.key(),
                label: r.label,
                vector,
            }
        })
        .collect();
    FeatureMatrix::new(vocab.len(), rows)
}
