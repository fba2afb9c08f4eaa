//! Run settings: defaults, then an optional JSON config file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use astdefect::classifiers::ClassifierKind;
use astdefect::eval::{FeatureMethod, PipelineConfig};
use astdefect::{json, Error, Result};
use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tree,
    Bow,
}

impl From<MethodArg> for FeatureMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tree => FeatureMethod::Tree,
            MethodArg::Bow => FeatureMethod::Bow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(alias = "lr")]
    Logistic,
    #[value(alias = "rf")]
    Forest,
}

impl From<KindArg> for ClassifierKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Logistic => ClassifierKind::Logistic,
            KindArg::Forest => ClassifierKind::Forest,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct VocabArgs {
    /// Maximum vocabulary size, `<unk>` included.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Labels seen fewer times than this map to `<unk>`.
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub vocab: VocabArgs,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub rms_decay: Option<f64>,
    #[arg(long)]
    pub rms_epsilon: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// 0 writes the freshly initialized model.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Trees per RMSprop step.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FeatureArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Minimum occurrences for a bag-of-words coordinate to be set.
    #[arg(long)]
    pub bow_threshold: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClassifierArgs {
    #[arg(long, value_enum)]
    pub classifier: Option<KindArg>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Candidate features per split; ⌈√dim⌉ when unset.
    #[arg(long)]
    pub features_per_split: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// Flags that every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON settings file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for featurization and experiment cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

impl GlobalArgs {
    /// Defaults overlaid with the config file; the master seed resolved.
    pub fn base_config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => json::from_str::<PipelineConfig>(&read_input(path)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

macro_rules! overlay {
    ($($dst:expr => $src:expr),* $(,)?) => {
        $(if let Some(v) = $src { $dst = v.into(); })*
    };
}

impl VocabArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        overlay!(
            cfg.pretrain.vocab_size => self.vocab_size,
            cfg.pretrain.min_count => self.min_count,
        );
    }
}

impl PretrainArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        self.vocab.apply(cfg);
        let p = &mut cfg.pretrain;
        overlay!(
            p.embedding_dim => self.embedding_dim,
            p.hidden_dim => self.hidden_dim,
            p.train.learning_rate => self.learning_rate,
            p.train.rms_decay => self.rms_decay,
            p.train.rms_epsilon => self.rms_epsilon,
            p.train.dropout_rate => self.dropout,
            p.train.max_epochs => self.max_epochs,
            p.train.patience => self.patience,
            p.train.batch_size => self.batch_size,
        );
    }
}

impl FeatureArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        overlay!(
            cfg.method => self.method,
            cfg.bow_threshold => self.bow_threshold,
        );
    }
}

impl ClassifierArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        let c = &mut cfg.classifier;
        overlay!(
            c.kind => self.classifier,
            c.forest.n_trees => self.n_trees,
            c.forest.max_depth => self.max_depth,
            c.forest.min_leaf => self.min_leaf,
            c.logistic.l2 => self.l2,
            c.logistic.max_iterations => self.max_iterations,
        );
        if self.features_per_split.is_some() {
            c.forest.features_per_split = self.features_per_split;
        }
    }
}

pub fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Fails before any work starts when an output cannot be created.
pub fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::Input(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(Error::Input(format!("output path {} is a directory", path.display())));
    }
    Ok(())
}

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
