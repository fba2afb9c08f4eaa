use super::{AstTree, Vocabulary};
use crate::error::{Error, Result};

/// A tree whose labels are vocabulary indices, stored as a post-order arena:
/// every child index is smaller than its parent's and the root is last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTree {
    labels: Vec<usize>,
    children: Vec<Vec<usize>>,
    depth: usize,
}

impl EncodedTree {
    /// Builds from post-order parts, checking the arena invariants.
    pub fn from_parts(labels: Vec<usize>, children: Vec<Vec<usize>>) -> Result<Self> {
        if labels.is_empty() || labels.len() != children.len() {
            return Err(Error::Contract("encoded tree needs one child list per node".into()));
        }
        let n = labels.len();
        let mut parent_seen = vec![false; n];
        for (p, kids) in children.iter().enumerate() {
            for &k in kids {
                if k >= p || parent_seen[k] {
                    return Err(Error::Contract(format!(
                        "node {k} is not a post-order child of {p}"
                    )));
                }
                parent_seen[k] = true;
            }
        }
        if parent_seen[..n - 1].iter().any(|seen| !seen) {
            return Err(Error::Contract("every non-root node needs exactly one parent".into()));
        }
        let mut depths = vec![1usize; n];
        for p in 0..n {
            for &k in &children[p] {
                depths[p] = depths[p].max(depths[k] + 1);
            }
        }
        let depth = depths[n - 1];
        Ok(EncodedTree {
            labels,
            children,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Nodes with at least one child; each one is a parent-prediction target.
    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&n| !self.children[n].is_empty())
    }

    pub fn internal_count(&self) -> usize {
        self.children.iter().filter(|c| !c.is_empty()).count()
    }

    /// Rebuilds the labeled tree; out-of-range indices decode as `<unk>`.
    pub fn decode(&self, vocab: &Vocabulary) -> AstTree {
        let mut built: Vec<Option<AstTree>> = (0..self.len()).map(|_| None).collect();
        for node in 0..self.len() {
            let children = self.children[node]
                .iter()
                .map(|&k| built[k].take().expect("post-order child built before parent"))
                .collect();
            let label = vocab.token(self.labels[node]).unwrap_or(super::UNK_TOKEN);
            built[node] = Some(AstTree::node(label, children));
        }
        built.pop().flatten().expect("root is last")
    }
}

/// Maps each label to its vocabulary index (unseen labels to `<unk>`),
/// preserving shape and child order.
pub fn encode(tree: &AstTree, vocab: &Vocabulary) -> EncodedTree {
    let mut labels = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut depths: Vec<usize> = Vec::new();
    // (node, next child to visit, arena slots of finished children)
    let mut stack: Vec<(&AstTree, usize, Vec<usize>)> = vec![(tree, 0, Vec::new())];
    while let Some(top) = stack.last_mut() {
        let (node, next) = (top.0, top.1);
        if next < node.children.len() {
            top.1 += 1;
            stack.push((&node.children[next], 0, Vec::new()));
            continue;
        }
        let (node, _, kids) = stack.pop().expect("non-empty");
        let depth = 1 + kids.iter().map(|&k| depths[k]).max().unwrap_or(0);
        let slot = labels.len();
        labels.push(vocab.index_of(&node.label));
        children.push(kids);
        depths.push(depth);
        if let Some(parent) = stack.last_mut() {
            parent.2.push(slot);
        }
    }
    let depth = depths.last().copied().unwrap_or(0);
    EncodedTree {
        labels,
        children,
        depth,
    }
}
