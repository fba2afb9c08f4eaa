use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AstTree;
use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_VOCAB_SIZE: usize = 10_000;
pub const DEFAULT_MIN_COUNT: usize = 2;

/// Bidirectional token/index map. Index 0 is always `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const UNK: usize = 0;

    /// Builds from an explicit token list; the first entry must be `<unk>`.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::schema("vocab[0]", format!("must be {UNK_TOKEN}")));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::schema(format!("vocab[{i}]"), format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_index(&self) -> usize {
        Self::UNK
    }

    /// Index of `token`, or the `<unk>` index when absent.
    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        Vocabulary::from_tokens(tokens).map_err(serde::de::Error::custom)
    }
}

/// Keeps `<unk>` plus the most frequent labels, at most `max_size` entries
/// in total. Labels seen fewer than `min_count` times are dropped; equal
/// counts are ordered lexicographically.
pub fn build_vocabulary<'a, I>(trees: I, max_size: usize, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a AstTree>,
{
    if max_size < 1 {
        return Err(Error::Config("vocabulary size must be at least 1".into()));
    }
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tree in trees {
        for label in tree.labels() {
            *counts.entry(label).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != UNK_TOKEN)
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = std::iter::once(UNK_TOKEN)
        .chain(ranked.into_iter().map(|(t, _)| t))
        .take(max_size)
        .map(str::to_string)
        .collect();
    Vocabulary::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(counts: &[(&str, usize)]) -> Vec<AstTree> {
        counts
            .iter()
            .flat_map(|&(t, n)| std::iter::repeat_with(move || AstTree::leaf(t)).take(n))
            .collect()
    }

    fn tokens(v: &Vocabulary) -> Vec<&str> {
        v.tokens().iter().map(String::as_str).collect()
    }

    #[test]
    fn frequency_cap_and_min_count() {
        let trees = corpus(&[("a", 5), ("b", 3), ("c", 1)]);
        let v = build_vocabulary(&trees, 3, 2).unwrap();
        assert_eq!(tokens(&v), ["<unk>", "a", "b"]);
        assert_eq!(v.index_of("c"), Vocabulary::UNK);
    }

    #[test]
    fn capacity_one_is_unk_only() {
        let trees = corpus(&[("a", 5)]);
        let v = build_vocabulary(&trees, 1, 1).unwrap();
        assert_eq!(tokens(&v), ["<unk>"]);
    }

    #[test]
    fn ties_broken_lexicographically() {
        let trees = corpus(&[("zeta", 4), ("beta", 4), ("alpha", 7)]);
        let v = build_vocabulary(&trees, 3, 1).unwrap();
        assert_eq!(tokens(&v), ["<unk>", "alpha", "beta"]);
    }

    #[test]
    fn counts_every_node_of_nested_trees() {
        let t = AstTree::node("R", vec![AstTree::leaf("x"), AstTree::node("R", vec![AstTree::leaf("x")])]);
        let v = build_vocabulary([&t], 10, 2).unwrap();
        assert_eq!(tokens(&v), ["<unk>", "R", "x"]);
    }

    #[test]
    fn invalid_parameters_and_token_lists() {
        assert!(build_vocabulary(&[] as &[AstTree], 0, 1).is_err());
        assert!(build_vocabulary(&[] as &[AstTree], 1, 0).is_err());
        assert!(Vocabulary::from_tokens(vec!["a".into()]).is_err());
        assert!(Vocabulary::from_tokens(vec!["<unk>".into(), "a".into(), "a".into()]).is_err());
    }

    #[test]
    fn serde_as_token_array() {
        let v = build_vocabulary(&corpus(&[("a", 2)]), 5, 1).unwrap();
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"["<unk>","a"]"#);
        let back: Vocabulary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }
}
