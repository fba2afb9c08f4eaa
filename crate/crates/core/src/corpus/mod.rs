//! Source ingestion: abstract syntax trees, file records, label
//! normalization, vocabulary construction and index encoding.

mod document;
mod encode;
mod normalize;
mod parser;
mod vocab;

pub use document::{load_ast_document, write_ast_document, FORMAT_VERSION};
pub use encode::{encode, EncodedTree};
pub use normalize::{is_raw_literal, normalize_labels, normalize_in_place};
pub use parser::{parse_mini, parse_mini_raw, TYPE_KEYWORDS};
pub use vocab::{build_vocabulary, Vocabulary, DEFAULT_MIN_COUNT, DEFAULT_VOCAB_SIZE, UNK_TOKEN};

use std::collections::HashSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A labeled, ordered tree of AST nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AstTree {
    pub label: String,
    pub children: Vec<AstTree>,
}

impl AstTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        AstTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<AstTree>) -> Self {
        AstTree {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Labels in preorder.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        Preorder { stack: vec![self] }.map(|n| n.label.as_str())
    }

    pub fn node_count(&self) -> usize {
        Preorder { stack: vec![self] }.count()
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((node, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(node.children.iter().map(|c| (c, d + 1)));
        }
        best
    }

    /// Checks that every label is non-empty; `path` prefixes error locations.
    pub fn validate(&self, path: &str) -> Result<()> {
        let mut stack = vec![(self, path.to_string())];
        while let Some((node, p)) = stack.pop() {
            if node.label.is_empty() {
                return Err(Error::schema(p, "node label must be a non-empty string"));
            }
            for (i, c) in node.children.iter().enumerate() {
                stack.push((c, format!("{p}.children[{i}]")));
            }
        }
        Ok(())
    }
}

// Deep trees would otherwise overflow the stack in the compiler-generated
// recursive drop.
impl Drop for AstTree {
    fn drop(&mut self) {
        let mut pending = std::mem::take(&mut self.children);
        while let Some(mut node) = pending.pop() {
            pending.append(&mut node.children);
        }
    }
}

struct Preorder<'a> {
    stack: Vec<&'a AstTree>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a AstTree;

    fn next(&mut self) -> Option<&'a AstTree> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// File-level ground truth; defective is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Clean = 0,
    Defective = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Label> {
        match bit {
            0 => Some(Label::Clean),
            1 => Some(Label::Defective),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn is_defective(self) -> bool {
        self == Label::Defective
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.bit())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let bit = u8::deserialize(deserializer)?;
        Label::from_bit(bit).ok_or_else(|| D::Error::custom(format!("label must be 0 or 1, got {bit}")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub file_id: String,
    pub project: String,
    pub version: String,
    pub label: Option<Label>,
    pub tree: AstTree,
}

impl FileRecord {
    /// `project/version/file_id`, used in error messages and report keys.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.project, self.version, self.file_id)
    }
}

/// Rejects repeated (project, version, file_id) triples.
pub fn check_unique(records: &[FileRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert((&r.project, &r.version, &r.file_id)) {
            return Err(Error::DuplicateRecord {
                project: r.project.clone(),
                version: r.version.clone(),
                file_id: r.file_id.clone(),
            });
        }
    }
    Ok(())
}
