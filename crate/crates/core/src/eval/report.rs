use serde::Serialize;

use super::metrics::{auc, confusion, f_measure, precision, recall, ConfusionMatrix};
use crate::classifiers::predict;
use crate::corpus::Label;
use crate::error::Result;
use crate::json;

pub const FLAG_PRECISION: &str = "precision_undefined";
pub const FLAG_RECALL: &str = "recall_undefined";
pub const FLAG_F_MEASURE: &str = "f_measure_undefined";
pub const FLAG_AUC: &str = "auc_undefined";

/// Training-side facts about one cell, kept only in the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDetail {
    pub n_train: usize,
    pub n_test: usize,
    pub vocab_size: usize,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub val_perplexity: Option<f64>,
}

/// Metrics of one experiment cell. Undefined ratios are reported as 0 and
/// named in `flags`; an undefined AUC is `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cell_train: String,
    pub cell_test: String,
    pub matrix: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: Option<f64>,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<CellDetail>,
}

impl MetricsReport {
    pub fn from_scores(cell_train: &str, cell_test: &str, scores: &[f64], labels: &[Label]) -> Result<Self> {
        let preds: Vec<Label> = scores.iter().map(|&p| predict(p)).collect();
        let matrix = confusion(&preds, labels)?;
        let mut flags = Vec::new();
        let mut defined = |v: Option<f64>, flag: &str| {
            v.unwrap_or_else(|| {
                flags.push(flag.to_string());
                0.0
            })
        };
        let p = defined(precision(&matrix), FLAG_PRECISION);
        let r = defined(recall(&matrix), FLAG_RECALL);
        let f = defined(f_measure(&matrix), FLAG_F_MEASURE);
        let a = auc(scores, labels).ok();
        if a.is_none() {
            flags.push(FLAG_AUC.to_string());
        }
        Ok(MetricsReport {
            cell_train: cell_train.to_string(),
            cell_test: cell_test.to_string(),
            matrix,
            precision: p,
            recall: r,
            f_measure: f,
            auc: a,
            flags,
            detail: None,
        })
    }

    pub fn has_undefined(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Per-cell rows plus, for cross-validation, a macro-averaged row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<MetricsReport>,
    /// Cells left out of the AUC average because their AUC is undefined.
    pub auc_excluded: usize,
}

impl ExperimentReport {
    pub fn cells(rows: Vec<MetricsReport>) -> Self {
        let auc_excluded = rows.iter().filter(|r| r.auc.is_none()).count();
        ExperimentReport {
            rows,
            mean: None,
            auc_excluded,
        }
    }

    /// Summed confusion matrix; precision, recall and F averaged over all
    /// cells; AUC averaged over cells where it is defined.
    pub fn averaged(rows: Vec<MetricsReport>, cell_train: &str, cell_test: &str) -> Self {
        let n = rows.len() as f64;
        let mut matrix = ConfusionMatrix::default();
        rows.iter().for_each(|r| matrix.add(&r.matrix));
        let mean_of = |f: fn(&MetricsReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let aucs: Vec<f64> = rows.iter().filter_map(|r| r.auc).collect();
        let auc_excluded = rows.len() - aucs.len();
        let mut flags = Vec::new();
        for flag in [FLAG_PRECISION, FLAG_RECALL, FLAG_F_MEASURE] {
            let count = rows.iter().filter(|r| r.flags.iter().any(|f| f == flag)).count();
            if count > 0 {
                flags.push(format!("{flag}={count}"));
            }
        }
        let auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
        if auc_excluded > 0 {
            flags.push(format!("auc_excluded={auc_excluded}"));
        }
        let mean = MetricsReport {
            cell_train: cell_train.to_string(),
            cell_test: cell_test.to_string(),
            matrix,
            precision: mean_of(|r| r.precision),
            recall: mean_of(|r| r.recall),
            f_measure: mean_of(|r| r.f_measure),
            auc,
            flags,
            detail: None,
        };
        ExperimentReport {
            rows,
            mean: Some(mean),
            auc_excluded,
        }
    }

    pub fn has_undefined(&self) -> bool {
        self.rows.iter().any(MetricsReport::has_undefined)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_train,cell_test,tp,fp,fn,tn,precision,recall,f_measure,auc,flags\n");
        for r in self.rows.iter().chain(&self.mean) {
            let m = &r.matrix;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                csv_field(&r.cell_train),
                csv_field(&r.cell_test),
                m.tp,
                m.fp,
                m.fn_,
                m.tn,
                r.precision,
                r.recall,
                r.f_measure,
                r.auc.map_or(String::new(), |a| a.to_string()),
                csv_field(&r.flags.join(";"))
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
