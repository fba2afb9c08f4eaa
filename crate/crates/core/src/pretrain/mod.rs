//! Unsupervised Tree-LSTM training: every internal node's label is predicted
//! from the mean hidden state of its children, and the resulting
//! cross-entropy is minimized with RMSprop under dropout, early stopping and
//! perplexity-based snapshot selection.

mod loss;
mod rmsprop;

pub use loss::{corpus_loss, gradients, parent_distribution, perplexity, DropoutMasks, Gradients};
pub use rmsprop::{rmsprop_step, RmspropConfig, RmspropState};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, encode, EncodedTree, FileRecord, Vocabulary};
use crate::embedding::DEFAULT_EMBEDDING_DIM;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng;
use crate::treelstm::TreeLstmModel;

/// Softmax weights: one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainHead {
    pub u: Matrix,
}

impl PretrainHead {
    pub fn zeros(vocab_size: usize, hidden_dim: usize) -> Self {
        PretrainHead {
            u: Matrix::zeros(vocab_size, hidden_dim),
        }
    }

    pub fn glorot<R: Rng>(vocab_size: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (vocab_size + hidden_dim) as f64).sqrt();
        PretrainHead {
            u: Matrix::uniform(vocab_size, hidden_dim, bound, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.u.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.u.rows()).map(|r| dot(self.u.row(r), x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub dropout_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// (train, validation, test) fractions.
    pub split: [f64; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        let rms = RmspropConfig::default();
        TrainConfig {
            learning_rate: rms.learning_rate,
            rms_decay: rms.decay,
            rms_epsilon: rms.epsilon,
            dropout_rate: 0.5,
            max_epochs: 30,
            patience: 5,
            batch_size: 8,
            seed: 0,
            split: [0.8, 0.1, 0.1],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return bad("rms decay must lie in [0, 1)");
        }
        if !(self.rms_epsilon > 0.0) {
            return bad("rms epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.split.iter().any(|f| !(*f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("split fractions must be positive and sum to 1");
        }
        Ok(())
    }

    pub fn rmsprop(&self) -> RmspropConfig {
        RmspropConfig {
            learning_rate: self.learning_rate,
            decay: self.rms_decay,
            epsilon: self.rms_epsilon,
        }
    }
}

/// Everything pretraining needs, including how to build the vocabulary and
/// size the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub vocab_size: usize,
    pub min_count: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub train: TrainConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            vocab_size: crate::corpus::DEFAULT_VOCAB_SIZE,
            min_count: crate::corpus::DEFAULT_MIN_COUNT,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            hidden_dim: DEFAULT_EMBEDDING_DIM,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_perplexity: f64,
    pub improved: bool,
}

/// Renders the per-epoch log as `epoch,train_loss,val_perplexity,improved`.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_perplexity,improved\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch,
            e.train_loss,
            e.val_perplexity,
            u8::from(e.improved)
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub model: TreeLstmModel,
    pub head: PretrainHead,
    pub log: Vec<EpochLog>,
    /// Epoch of the returned snapshot; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub val_perplexity: f64,
    pub test_perplexity: f64,
    pub split_sizes: [usize; 3],
}

/// Seeded shuffle of `0..n`, cut into train/validation/test index sets.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let n_train = (n as f64 * fractions[0]).round() as usize;
    let n_val = ((n as f64 * fractions[1]).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    if order.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Input(format!(
            "{n} records leave an empty partition under split {fractions:?} \
             ({} train, {} validation, {} test)",
            order.len(),
            val.len(),
            test.len()
        )));
    }
    Ok([order, val, test])
}

/// Splits `records`, builds the vocabulary from the training part only,
/// initializes a model and trains it.
pub fn pretrain(records: &[FileRecord], config: &PretrainConfig) -> Result<PretrainOutcome> {
    config.train.validate()?;
    if records.is_empty() {
        return Err(Error::Input("pretraining corpus is empty".into()));
    }
    let [train, val, test] = split_indices(records.len(), config.train.split, config.train.seed)?;
    let vocab = build_vocabulary(
        train.iter().map(|&i| &records[i].tree),
        config.vocab_size,
        config.min_count,
    )?;
    let encode_all = |idx: &[usize]| -> Vec<EncodedTree> {
        idx.iter().map(|&i| encode(&records[i].tree, &vocab)).collect()
    };
    let (train_trees, val_trees, test_trees) = (encode_all(&train), encode_all(&val), encode_all(&test));
    let sizes = [train.len(), val.len(), test.len()];
    let mut outcome = train_model(vocab, &train_trees, &val_trees, config)?;
    outcome.test_perplexity = perplexity(&outcome.model, &outcome.head, &test_trees).unwrap_or(f64::NAN);
    outcome.split_sizes = sizes;
    Ok(outcome)
}

/// Fresh model and head for `vocab`, seeded from the `init` stream.
pub fn initial_model(vocab: Vocabulary, config: &PretrainConfig) -> Result<(TreeLstmModel, PretrainHead)> {
    let init_seed = rng::derive_seed(config.train.seed, "init");
    let head = PretrainHead::glorot(
        vocab.len(),
        config.hidden_dim,
        &mut rng::stream(init_seed, "head"),
    );
    let model = TreeLstmModel::init(vocab, config.embedding_dim, config.hidden_dim, init_seed)?;
    Ok((model, head))
}

/// Trains on already-encoded trees. The validation trees only ever reach the
/// perplexity evaluator.
pub fn train_model(
    vocab: Vocabulary,
    train: &[EncodedTree],
    validation: &[EncodedTree],
    config: &PretrainConfig,
) -> Result<PretrainOutcome> {
    let cfg = &config.train;
    cfg.validate()?;
    if train.iter().all(|t| t.internal_count() == 0) {
        return Err(Error::Input("training split has no internal nodes".into()));
    }
    let (mut model, mut head) = initial_model(vocab, config)?;
    let (d, hd) = (model.embedding_dim(), model.hidden_dim());
    let rms = cfg.rmsprop();
    let mut state = {
        let mut tensors = model.tensors();
        tensors.push(head.u.as_slice());
        RmspropState::new(tensors)
    };
    let mut shuffle_rng = rng::stream(cfg.seed, "shuffle");
    let mut dropout_rng = rng::stream(cfg.seed, "dropout");

    let mut best_ppl = perplexity(&model, &head, validation)?;
    let mut best = (model.clone(), head.clone());
    let mut best_epoch = None;
    let mut log = Vec::new();
    let mut since_improved = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut count) = (0.0, 0usize);
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<EncodedTree> = batch_idx
                .iter()
                .map(|&i| &train[i])
                .filter(|t| t.internal_count() > 0)
                .cloned()
                .collect();
            if batch.is_empty() {
                continue;
            }
            let masks: Option<Vec<DropoutMasks>> = (cfg.dropout_rate > 0.0).then(|| {
                batch
                    .iter()
                    .map(|t| DropoutMasks::sample(t, d, hd, cfg.dropout_rate, &mut dropout_rng))
                    .collect()
            });
            let (loss, grads) = gradients(&batch, &model, &head, masks.as_deref())?;
            let n_internal: usize = batch.iter().map(EncodedTree::internal_count).sum();
            loss_sum += loss * n_internal as f64;
            count += n_internal;
            let mut params = model.tensors_mut();
            params.push(head.u.as_mut_slice());
            state.step(params, grads.tensors(), &rms);
        }
        let val_ppl = perplexity(&model, &head, validation)?;
        let improved = epoch == 1 || val_ppl < best_ppl;
        if improved {
            best_ppl = val_ppl;
            best = (model.clone(), head.clone());
            best_epoch = Some(epoch);
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / count.max(1) as f64,
            val_perplexity: val_ppl,
            improved,
        });
        log::info!(
            "epoch {epoch}: train loss {:.4}, validation perplexity {val_ppl:.3}{}",
            loss_sum / count.max(1) as f64,
            if improved { " (best)" } else { "" }
        );
        if since_improved >= cfg.patience {
            break;
        }
    }

    let (model, head) = best;
    Ok(PretrainOutcome {
        model,
        head,
        log,
        best_epoch,
        val_perplexity: best_ppl,
        test_perplexity: f64::NAN,
        split_sizes: [train.len(), validation.len(), 0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AstTree, Label};

    fn corpus(n: usize) -> Vec<FileRecord> {
        (0..n)
            .map(|i| {
                let body = if i % 2 == 0 {
                    AstTree::node("WhileStmt", vec![AstTree::leaf("x"), AstTree::node("BlockStmt", vec![AstTree::leaf("y")])])
                } else {
                    AstTree::node("IfStmt", vec![AstTree::leaf("x"), AstTree::node("ExprStmt", vec![AstTree::leaf("z")])])
                };
                FileRecord {
                    file_id: format!("F{i}.java"),
                    project: "p".into(),
                    version: "1".into(),
                    label: Some(Label::from_bit((i % 2) as u8).unwrap()),
                    tree: AstTree::node("CompilationUnit", vec![body]),
                }
            })
            .collect()
    }

    fn small_config(epochs: usize) -> PretrainConfig {
        PretrainConfig {
            embedding_dim: 4,
            hidden_dim: 4,
            min_count: 1,
            train: TrainConfig {
                max_epochs: epochs,
                learning_rate: 0.01,
                seed: 5,
                ..TrainConfig::default()
            },
            ..PretrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let records = corpus(20);
        let out = pretrain(&records, &small_config(0)).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.best_epoch, None);
        let (init, head) = initial_model(out.model.vocab().clone(), &small_config(0)).unwrap();
        assert_eq!(out.model, init);
        assert_eq!(out.head, head);
        assert_eq!(out.split_sizes, [16, 2, 2]);
    }

    #[test]
    fn training_beats_uniform_and_keeps_best_snapshot() {
        let records = corpus(40);
        let out = pretrain(&records, &small_config(15)).unwrap();
        let v = out.model.vocab().len() as f64;
        assert!(out.val_perplexity < v);
        assert!(out.log.iter().all(|e| out.val_perplexity <= e.val_perplexity));
        assert!(out.test_perplexity.is_finite());
        let csv = log_to_csv(&out.log);
        assert!(csv.starts_with("epoch,train_loss,val_perplexity,improved\n"));
        assert_eq!(csv.lines().count(), out.log.len() + 1);
    }

    #[test]
    fn equal_seeds_give_identical_runs() {
        let records = corpus(30);
        let cfg = small_config(4);
        let a = pretrain(&records, &cfg).unwrap();
        let b = pretrain(&records, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
        let mut no_drop = cfg.clone();
        no_drop.train.dropout_rate = 0.0;
        assert_eq!(pretrain(&records, &no_drop).unwrap().log, pretrain(&records, &no_drop).unwrap().log);
    }

    #[test]
    fn loss_ignores_file_ids() {
        let records = corpus(30);
        let renamed: Vec<_> = records
            .iter()
            .cloned()
            .map(|mut r| {
                r.file_id = format!("renamed/{}", r.file_id);
                r
            })
            .collect();
        let cfg = small_config(2);
        assert_eq!(pretrain(&records, &cfg).unwrap().log, pretrain(&renamed, &cfg).unwrap().log);
    }

    #[test]
    fn invalid_configs_and_empty_partitions_rejected() {
        let mut cfg = small_config(1);
        cfg.train.split = [0.5, 0.5, 0.1];
        assert!(matches!(pretrain(&corpus(10), &cfg), Err(Error::Config(_))));
        let mut cfg = small_config(1);
        cfg.train.rms_decay = 1.0;
        assert!(cfg.train.validate().is_err());
        cfg.train.rms_decay = 0.9;
        cfg.train.dropout_rate = 1.0;
        assert!(cfg.train.validate().is_err());
        assert!(matches!(pretrain(&corpus(3), &small_config(1)), Err(Error::Input(_))));
        assert!(pretrain(&[], &small_config(1)).is_err());
    }

    #[test]
    fn split_partitions_every_index_once() {
        let [a, b, c] = split_indices(50, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (40, 5, 5));
        let mut all: Vec<_> = a.into_iter().chain(b).chain(c).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
