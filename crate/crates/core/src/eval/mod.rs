//! Metrics, fold construction and the experiment drivers.
//!
//! Every experiment cell trains its own vocabulary, Tree-LSTM and classifier
//! from its training partition alone; the held-out files are only encoded
//! and scored.

mod folds;
mod metrics;
mod report;
mod stats;

pub use folds::stratified_k_fold;
pub use metrics::{auc, confusion, f_measure, precision, recall, ConfusionMatrix};
pub use report::{
    CellDetail, ExperimentReport, MetricsReport, FLAG_AUC, FLAG_F_MEASURE, FLAG_PRECISION, FLAG_RECALL,
};
pub use stats::{dataset_stats, stats_csv, stats_table, ProjectStats};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{bow_featurize, featurize_corpus, train_classifier, Classifier, ClassifierConfig, FeatureMatrix};
use crate::corpus::{build_vocabulary, FileRecord, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::json;
use crate::pretrain::{pretrain, EpochLog, PretrainConfig, PretrainHead};
use crate::rng::derive_seed;
use crate::treelstm::TreeLstmModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMethod {
    /// Root hidden state of a pretrained Tree-LSTM.
    Tree,
    /// Two-bin bag of AST labels.
    Bow,
}

/// Everything one experiment cell needs. `seed` is the master seed; the
/// seeds inside `pretrain` and `classifier` are overwritten from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub method: FeatureMethod,
    pub bow_threshold: usize,
    pub pretrain: PretrainConfig,
    pub classifier: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            method: FeatureMethod::Tree,
            bow_threshold: 5,
            pretrain: PretrainConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl PipelineConfig {
    fn seeded(&self) -> (PretrainConfig, ClassifierConfig) {
        let mut p = self.pretrain.clone();
        p.train.seed = derive_seed(self.seed, "pretrain");
        let mut c = self.classifier;
        c.forest.seed = derive_seed(self.seed, "classifier");
        (p, c)
    }

    fn for_cell(&self, name: &str) -> PipelineConfig {
        PipelineConfig {
            seed: derive_seed(self.seed, name),
            ..self.clone()
        }
    }
}

/// Artifacts fitted on one training partition.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub method: FeatureMethod,
    pub bow_threshold: usize,
    pub vocab: Vocabulary,
    pub model: Option<TreeLstmModel>,
    pub head: Option<PretrainHead>,
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub val_perplexity: Option<f64>,
    pub train_features: FeatureMatrix,
    pub classifier: Classifier,
}

impl TrainedPipeline {
    pub fn featurize(&self, records: &[FileRecord]) -> Result<FeatureMatrix> {
        match &self.model {
            Some(model) => featurize_corpus(records, model),
            None => bow_featurize(records, &self.vocab, self.bow_threshold),
        }
    }

    /// `p(defective)` for every record, in order.
    pub fn score(&self, records: &[FileRecord]) -> Result<(FeatureMatrix, Vec<f64>)> {
        let features = self.featurize(records)?;
        let scores = features.vectors().iter().map(|x| self.classifier.predict_proba(x)).collect();
        Ok((features, scores))
    }
}

fn require_labels(records: &[FileRecord], role: &str) -> Result<Vec<Label>> {
    records
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| Error::Input(format!("{role} file {} has no defect label", r.key())))
        })
        .collect()
}

/// Builds vocabulary, features and classifier from `train` only.
pub fn fit_pipeline(train: &[FileRecord], config: &PipelineConfig) -> Result<TrainedPipeline> {
    if train.is_empty() {
        return Err(Error::Input("training cell is empty".into()));
    }
    let labels = require_labels(train, "training")?;
    let (pcfg, ccfg) = config.seeded();
    let (vocab, model, head, log, best_epoch, val_ppl) = match config.method {
        FeatureMethod::Tree => {
            let out = pretrain(train, &pcfg)?;
            let vocab = out.model.vocab().clone();
            (vocab, Some(out.model), Some(out.head), out.log, out.best_epoch, Some(out.val_perplexity))
        }
        FeatureMethod::Bow => {
            let vocab = build_vocabulary(train.iter().map(|r| &r.tree), pcfg.vocab_size, pcfg.min_count)?;
            (vocab, None, None, Vec::new(), None, None)
        }
    };
    let mut pipeline = TrainedPipeline {
        method: config.method,
        bow_threshold: config.bow_threshold,
        vocab,
        model,
        head,
        log,
        best_epoch,
        val_perplexity: val_ppl,
        train_features: FeatureMatrix::new(0, Vec::new())?,
        classifier: Classifier::Logistic(crate::classifiers::LogisticModel::zeros(0)),
    };
    let features = pipeline.featurize(train)?;
    pipeline.classifier = train_classifier(&features.vectors(), &labels, &ccfg)?;
    pipeline.train_features = features;
    Ok(pipeline)
}

/// One evaluated cell with the artifacts that produced it.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub report: MetricsReport,
    pub pipeline: TrainedPipeline,
    pub test_features: FeatureMatrix,
    pub scores: Vec<f64>,
}

/// Fits on `train`, scores `test`. Test labels are required.
pub fn run_cell(
    train: &[FileRecord],
    test: &[FileRecord],
    cell_train: &str,
    cell_test: &str,
    config: &PipelineConfig,
) -> Result<CellRun> {
    if test.is_empty() {
        return Err(Error::Input(format!("test cell {cell_test} is empty")));
    }
    let labels = require_labels(test, "test")?;
    let pipeline = fit_pipeline(train, config)?;
    let (test_features, scores) = pipeline.score(test)?;
    let mut report = MetricsReport::from_scores(cell_train, cell_test, &scores, &labels)?;
    report.detail = Some(CellDetail {
        n_train: train.len(),
        n_test: test.len(),
        vocab_size: pipeline.vocab.len(),
        best_epoch: pipeline.best_epoch,
        epochs_run: pipeline.log.len(),
        val_perplexity: pipeline.val_perplexity,
    });
    Ok(CellRun {
        report,
        pipeline,
        test_features,
        scores,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub runs: Vec<CellRun>,
}

/// k-fold cross-validation over `records`, one cell per fold, averaged.
pub fn within_project_cv(records: &[FileRecord], k: usize, config: &PipelineConfig) -> Result<ExperimentOutcome> {
    require_labels(records, "cross-validation")?;
    let labels: Vec<Option<Label>> = records.iter().map(|r| r.label).collect();
    let folds = stratified_k_fold(&labels, k, derive_seed(config.seed, "folds"))?;
    let scope = scope_name(records);
    let runs = folds
        .par_iter()
        .enumerate()
        .map(|(i, test_idx)| {
            let mut in_test = vec![false; records.len()];
            test_idx.iter().for_each(|&t| in_test[t] = true);
            let train: Vec<FileRecord> = records
                .iter()
                .zip(&in_test)
                .filter(|(_, &t)| !t)
                .map(|(r, _)| r.clone())
                .collect();
            let test: Vec<FileRecord> = test_idx.iter().map(|&t| records[t].clone()).collect();
            run_cell(
                &train,
                &test,
                &format!("{scope}/train-{i}"),
                &format!("{scope}/fold-{i}"),
                &config.for_cell(&format!("fold-{i}")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport::averaged(
        runs.iter().map(|r| r.report.clone()).collect(),
        &format!("{scope}/mean"),
        &format!("{scope}/mean"),
    );
    Ok(ExperimentOutcome { report, runs })
}

fn scope_name(records: &[FileRecord]) -> String {
    match records.first() {
        Some(first) if records.iter().all(|r| r.project == first.project) => first.project.clone(),
        _ => "all".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub project: String,
    pub version: String,
}

impl CellId {
    pub fn new(project: &str, version: &str) -> Self {
        CellId {
            project: project.to_string(),
            version: version.to_string(),
        }
    }

    pub fn select(&self, records: &[FileRecord]) -> Vec<FileRecord> {
        records
            .iter()
            .filter(|r| r.project == self.project && r.version == self.version)
            .cloned()
            .collect()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.project, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionPair {
    pub train: CellId,
    pub test: CellId,
}

/// Train on one (project, version) cell and test on another.
pub fn version_pair_run(
    train: &CellId,
    test: &CellId,
    records: &[FileRecord],
    config: &PipelineConfig,
) -> Result<CellRun> {
    let train_records = train.select(records);
    if train_records.is_empty() {
        return Err(Error::Input(format!("training cell {train} has no files")));
    }
    let test_records = test.select(records);
    run_cell(
        &train_records,
        &test_records,
        &train.to_string(),
        &test.to_string(),
        &config.for_cell(&format!("pair:{train}->{test}")),
    )
}

/// What an experiment file asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentDescriptor {
    Cv {
        #[serde(default = "default_k")]
        k: usize,
        /// Restrict to one project; all records otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        project: Option<String>,
    },
    Pairs { pairs: Vec<VersionPair> },
}

fn default_k() -> usize {
    10
}

impl ExperimentDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: ExperimentDescriptor = json::from_str(text)?;
        match &d {
            ExperimentDescriptor::Cv { k, .. } if *k < 2 => Err(Error::Config("cv needs k ≥ 2".into())),
            ExperimentDescriptor::Pairs { pairs } if pairs.is_empty() => {
                Err(Error::Config("pair list is empty".into()))
            }
            _ => Ok(d),
        }
    }
}

pub fn run_experiment(
    descriptor: &ExperimentDescriptor,
    records: &[FileRecord],
    config: &PipelineConfig,
) -> Result<ExperimentOutcome> {
    match descriptor {
        ExperimentDescriptor::Cv { k, project } => {
            let selected: Vec<FileRecord> = match project {
                Some(p) => records.iter().filter(|r| &r.project == p).cloned().collect(),
                None => records.to_vec(),
            };
            if selected.is_empty() {
                return Err(Error::Input("cross-validation corpus is empty".into()));
            }
            within_project_cv(&selected, *k, config)
        }
        ExperimentDescriptor::Pairs { pairs } => {
            let runs = pairs
                .par_iter()
                .map(|p| version_pair_run(&p.train, &p.test, records, config))
                .collect::<Result<Vec<_>>>()?;
            let report = ExperimentReport::cells(runs.iter().map(|r| r.report.clone()).collect());
            Ok(ExperimentOutcome { report, runs })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierKind;
    use crate::corpus::AstTree;
    use crate::model_file::write_model;

    fn record(project: &str, version: &str, i: usize, defective: bool) -> FileRecord {
        let guard = if defective { "ExprStmt" } else { "IfStmt" };
        FileRecord {
            file_id: format!("F{i}.java"),
            project: project.into(),
            version: version.into(),
            label: Some(if defective { Label::Defective } else { Label::Clean }),
            tree: AstTree::node(
                "CompilationUnit",
                vec![AstTree::node(
                    "WhileStmt",
                    vec![AstTree::leaf("<"), AstTree::node("BlockStmt", vec![AstTree::leaf(guard), AstTree::leaf("x")])],
                )],
            ),
        }
    }

    fn corpus(project: &str, version: &str, n: usize) -> Vec<FileRecord> {
        (0..n).map(|i| record(project, version, i, i % 2 == 0)).collect()
    }

    fn fast_config(method: FeatureMethod) -> PipelineConfig {
        let mut c = PipelineConfig {
            seed: 3,
            method,
            bow_threshold: 1,
            ..PipelineConfig::default()
        };
        c.pretrain.embedding_dim = 4;
        c.pretrain.hidden_dim = 4;
        c.pretrain.min_count = 1;
        c.pretrain.train.max_epochs = 3;
        c.classifier.kind = ClassifierKind::Forest;
        c.classifier.forest.n_trees = 10;
        c
    }

    #[test]
    fn memorizing_pair_has_full_recall() {
        let recs = corpus("p", "1", 20);
        let id = CellId::new("p", "1");
        let run = version_pair_run(&id, &id, &recs, &fast_config(FeatureMethod::Bow)).unwrap();
        assert_eq!(run.report.recall, 1.0);
        assert_eq!(run.report.cell_train, "p/1");
    }

    #[test]
    fn disjoint_vocabulary_pair_completes() {
        let train = corpus("a", "1", 20);
        let mut test = corpus("b", "1", 10);
        for r in &mut test {
            r.tree = AstTree::node("Other", vec![AstTree::leaf("Thing")]);
        }
        let all: Vec<_> = train.into_iter().chain(test).collect();
        let cfg = fast_config(FeatureMethod::Tree);
        let run = version_pair_run(&CellId::new("a", "1"), &CellId::new("b", "1"), &all, &cfg).unwrap();
        assert_eq!(run.report.matrix.total(), 10);
        // every test file encodes to the same all-<unk> tree, hence one score
        assert!(run.scores.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(run.report.auc, Some(0.5));
    }

    #[test]
    fn cv_is_deterministic_and_averaged() {
        let recs = corpus("p", "1", 30);
        let cfg = fast_config(FeatureMethod::Tree);
        let a = within_project_cv(&recs, 3, &cfg).unwrap();
        let b = within_project_cv(&recs, 3, &cfg).unwrap();
        assert_eq!(a.report.to_csv(), b.report.to_csv());
        assert_eq!(a.report.rows.len(), 3);
        assert!(a.report.mean.is_some());
        assert_eq!(a.report.to_csv().lines().count(), 5);
    }

    #[test]
    fn fold_artifacts_ignore_test_fold_contents() {
        let recs = corpus("p", "1", 24);
        let cfg = fast_config(FeatureMethod::Tree);
        let base = within_project_cv(&recs, 3, &cfg).unwrap();
        let labels: Vec<_> = recs.iter().map(|r| r.label).collect();
        let folds = stratified_k_fold(&labels, 3, derive_seed(cfg.seed, "folds")).unwrap();
        let mut altered = recs.clone();
        for &i in &folds[0] {
            altered[i].tree = AstTree::node("Unseen", vec![AstTree::leaf("Tokens")]);
        }
        let again = within_project_cv(&altered, 3, &cfg).unwrap();
        let checksum = |o: &ExperimentOutcome| {
            let p = &o.runs[0].pipeline;
            write_model(p.model.as_ref().unwrap(), p.head.as_ref()).unwrap()
        };
        assert_eq!(checksum(&base), checksum(&again));
    }

    #[test]
    fn leave_one_out_records_undefined_auc() {
        let recs = corpus("p", "1", 10);
        let out = within_project_cv(&recs, 10, &fast_config(FeatureMethod::Bow)).unwrap();
        assert_eq!(out.report.auc_excluded, 10);
        assert_eq!(out.report.mean.as_ref().unwrap().auc, None);
    }

    #[test]
    fn descriptors_parse() {
        let cv = ExperimentDescriptor::from_json(r#"{"kind":"cv","k":5}"#).unwrap();
        assert_eq!(cv, ExperimentDescriptor::Cv { k: 5, project: None });
        let pairs = ExperimentDescriptor::from_json(
            r#"{"kind":"pairs","pairs":[{"train":{"project":"a","version":"1"},"test":{"project":"a","version":"2"}}]}"#,
        )
        .unwrap();
        assert!(matches!(pairs, ExperimentDescriptor::Pairs { ref pairs } if pairs.len() == 1));
        assert!(ExperimentDescriptor::from_json(r#"{"kind":"cv","k":1}"#).is_err());
        assert!(ExperimentDescriptor::from_json(r#"{"kind":"pairs","pairs":[]}"#).is_err());
    }

    #[test]
    fn unlabeled_test_cell_rejected() {
        let mut recs = corpus("p", "1", 10);
        recs.extend(corpus("p", "2", 4));
        recs[11].label = None;
        let cfg = fast_config(FeatureMethod::Bow);
        assert!(version_pair_run(&CellId::new("p", "1"), &CellId::new("p", "2"), &recs, &cfg).is_err());
        assert!(version_pair_run(&CellId::new("p", "9"), &CellId::new("p", "2"), &recs, &cfg).is_err());
    }
}
