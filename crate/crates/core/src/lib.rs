//! Learned source-file representations from abstract syntax trees.
//!
//! Source files are parsed into ASTs, embedded node by node and composed
//! bottom-up by a Child-Sum Tree-LSTM. The Tree-LSTM is pretrained without
//! defect labels by predicting each parent's label from its children; the
//! root hidden state then serves as the file's feature vector for ordinary
//! classifiers (logistic regression, random forests) that are evaluated
//! under within-project and cross-project protocols.

pub mod corpus;
pub mod error;
pub mod json;
pub mod rng;

pub use error::{Error, Result};
pub mod embedding;
pub mod linalg;
pub mod treelstm;
pub mod model_file;
pub mod pretrain;
pub mod classifiers;
pub mod eval;
pub mod synth;
