//! On-disk form of a trained Tree-LSTM and its pretraining head.

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::json;
use crate::linalg::Matrix;
use crate::pretrain::PretrainHead;
use crate::treelstm::{GateParams, TreeLstmModel};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u64,
    vocab: Vocabulary,
    d: usize,
    hidden_dim: usize,
    /// `d` rows of `|V|` values.
    embeddings: Matrix,
    forget: GateParams,
    input: GateParams,
    cell: GateParams,
    output: GateParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head: Option<PretrainHead>,
}

pub fn write_model(model: &TreeLstmModel, head: Option<&PretrainHead>) -> Result<String> {
    let doc = ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        vocab: model.vocab().clone(),
        d: model.embedding_dim(),
        hidden_dim: model.hidden_dim(),
        embeddings: model.embeddings().values().clone(),
        forget: model.forget.clone(),
        input: model.input.clone(),
        cell: model.cell.clone(),
        output: model.output.clone(),
        head: head.cloned(),
    };
    json::to_string(&doc)
}

pub fn read_model(text: &str) -> Result<(TreeLstmModel, Option<PretrainHead>)> {
    let doc: ModelDoc = json::from_str(text)?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::schema(
            "format_version",
            format!("unsupported model format {}", doc.format_version),
        ));
    }
    if doc.embeddings.rows() != doc.d {
        return Err(Error::schema("embeddings", format!("expected {} rows", doc.d)));
    }
    if doc.forget.b.len() != doc.hidden_dim {
        return Err(Error::schema("forget.b", format!("expected {} entries", doc.hidden_dim)));
    }
    let embeddings = EmbeddingMatrix::new(doc.embeddings)?;
    let model = TreeLstmModel::new(doc.vocab, embeddings, [doc.forget, doc.input, doc.cell, doc.output])?;
    if let Some(h) = &doc.head {
        if h.vocab_size() != model.vocab().len() || h.hidden_dim() != model.hidden_dim() {
            return Err(Error::schema("head", "shape does not match the model"));
        }
        if !h.u.is_finite() {
            return Err(Error::schema("head", "non-finite entry"));
        }
    }
    Ok((model, doc.head))
}
