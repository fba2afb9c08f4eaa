//! File-level defect classifiers over learned or bag-of-words features.
//!
//! Features are computed once from a frozen Tree-LSTM (or from token
//! counts); logistic regression and random forests are then fit on them.

mod features;
mod forest;
mod logistic;

pub use features::{
    bow_featurize, featurize_corpus, read_features, write_features, FeatureMatrix, FeatureRow,
    FEATURES_FORMAT_VERSION,
};
pub use forest::{predict_proba_forest, train_forest, DecisionTree, ForestConfig, ForestFit, ForestModel, TreeNode};
pub use logistic::{predict_proba_logistic, train_logistic, LogisticConfig, LogisticFit, LogisticModel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::json;

pub const CLASSIFIER_FORMAT_VERSION: u64 = 1;

/// Defective iff `p ≥ 0.5`.
pub fn predict(p: f64) -> Label {
    if p >= 0.5 {
        Label::Defective
    } else {
        Label::Clean
    }
}

pub(crate) fn check_training_set(x: &[&[f64]], y: &[Label]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Contract("feature rows differ in length".into()));
    }
    if !y.contains(&Label::Defective) || !y.contains(&Label::Clean) {
        return Err(Error::Input("training set needs both defective and clean files".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logistic,
    Forest,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Forest => "forest",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "lr" => Ok(ClassifierKind::Logistic),
            "forest" | "rf" => Ok(ClassifierKind::Forest),
            _ => Err(Error::Config(format!("unknown classifier kind {s:?}"))),
        }
    }
}

/// Settings for both classifier kinds; only the chosen kind's part is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Forest,
            logistic: LogisticConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Classifier {
    Logistic(LogisticModel),
    Forest(ForestModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Logistic(_) => ClassifierKind::Logistic,
            Classifier::Forest(_) => ClassifierKind::Forest,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Logistic(m) => m.weights.len(),
            Classifier::Forest(m) => m.dim,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Logistic(m) => m.predict_proba(x),
            Classifier::Forest(m) => m.predict_proba(x),
        }
    }
}

pub fn train_classifier(x: &[&[f64]], y: &[Label], config: &ClassifierConfig) -> Result<Classifier> {
    Ok(match config.kind {
        ClassifierKind::Logistic => Classifier::Logistic(train_logistic(x, y, &config.logistic)?.model),
        ClassifierKind::Forest => Classifier::Forest(train_forest(x, y, &config.forest)?.model),
    })
}

#[derive(Serialize, Deserialize)]
struct ClassifierDoc {
    format_version: u64,
    #[serde(flatten)]
    classifier: Classifier,
}

pub fn write_classifier(classifier: &Classifier) -> Result<String> {
    json::to_string(&ClassifierDoc {
        format_version: CLASSIFIER_FORMAT_VERSION,
        classifier: classifier.clone(),
    })
}

pub fn read_classifier(text: &str) -> Result<Classifier> {
    let doc: ClassifierDoc = json::from_str(text)?;
    if doc.format_version != CLASSIFIER_FORMAT_VERSION {
        return Err(Error::schema(
            "format_version",
            format!("unsupported classifier format {}", doc.format_version),
        ));
    }
    match &doc.classifier {
        Classifier::Forest(m) => m.validate()?,
        Classifier::Logistic(m) => {
            if m.weights.iter().any(|w| !w.is_finite()) || !m.bias.is_finite() {
                return Err(Error::schema("params", "non-finite logistic weight"));
            }
        }
    }
    Ok(doc.classifier)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_counts_boundary_as_defective() {
        assert_eq!(predict(0.5), Label::Defective);
        assert_eq!(predict(0.49999), Label::Clean);
        assert_eq!(predict(1.0), Label::Defective);
    }

    #[test]
    fn classifier_files_round_trip() {
        let x: Vec<&[f64]> = vec![&[0.0, 1.0], &[1.0, 0.0], &[0.2, 0.9], &[0.9, 0.1]];
        let y = [Label::Clean, Label::Defective, Label::Clean, Label::Defective];
        for kind in [ClassifierKind::Logistic, ClassifierKind::Forest] {
            let cfg = ClassifierConfig { kind, ..Default::default() };
            let c = train_classifier(&x, &y, &cfg).unwrap();
            let text = write_classifier(&c).unwrap();
            assert!(text.contains(&format!("\"kind\":\"{kind}\"")));
            assert_eq!(read_classifier(&text).unwrap(), c);
            assert_eq!(c.kind(), kind);
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("rf".parse::<ClassifierKind>().unwrap(), ClassifierKind::Forest);
        assert_eq!("logistic".parse::<ClassifierKind>().unwrap(), ClassifierKind::Logistic);
        assert!("svm".parse::<ClassifierKind>().is_err());
    }
}
