//! The AST-corpus interchange document:
//!
//! ```json
//! {"format_version": 1,
//!  "files": [{"file_id": "A.java", "project": "ant", "version": "1.5",
//!             "label": 1,
//!             "tree": {"label": "CompilationUnit", "children": []}}]}
//! ```

use serde::Serialize;
use serde_json::{Map, Value};

use super::{check_unique, AstTree, FileRecord, Label};
use crate::error::{Error, Result};
use crate::json;

pub const FORMAT_VERSION: u64 = 1;

pub fn load_ast_document(text: &str) -> Result<Vec<FileRecord>> {
    let root = json::value_from_str(text)?;
    let records = records_from_value(&root);
    json::dismantle(root);
    let records = records?;
    check_unique(&records)?;
    Ok(records)
}

pub fn write_ast_document(records: &[FileRecord]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        format_version: u64,
        files: &'a [FileRecord],
    }
    json::to_string(&Doc {
        format_version: FORMAT_VERSION,
        files: records,
    })
}

fn records_from_value(root: &Value) -> Result<Vec<FileRecord>> {
    let obj = root
        .as_object()
        .ok_or_else(|| Error::schema("$", "document must be an object"))?;
    match obj.get("format_version").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::schema("$.format_version", format!("unsupported version {v}"))),
        None => return Err(Error::schema("$.format_version", "missing or not an integer")),
    }
    let files = obj
        .get("files")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema("$.files", "missing or not an array"))?;
    files
        .iter()
        .enumerate()
        .map(|(i, entry)| record_from_value(entry, &format!("files[{i}]")))
        .collect()
}

fn string_field(obj: &Map<String, Value>, field: &str, path: &str) -> Result<String> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        _ => Err(Error::schema(format!("{path}.{field}"), "missing or not a string")),
    }
}

fn record_from_value(entry: &Value, path: &str) -> Result<FileRecord> {
    let obj = entry
        .as_object()
        .ok_or_else(|| Error::schema(path, "file entry must be an object"))?;
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .and_then(|b| u8::try_from(b).ok())
                .and_then(Label::from_bit)
                .ok_or_else(|| Error::schema(format!("{path}.label"), "must be 0, 1 or null"))?,
        ),
    };
    let tree_value = obj
        .get("tree")
        .ok_or_else(|| Error::schema(format!("{path}.tree"), "missing"))?;
    Ok(FileRecord {
        file_id: string_field(obj, "file_id", path)?,
        project: string_field(obj, "project", path)?,
        version: string_field(obj, "version", path)?,
        label,
        tree: tree_from_value(tree_value, &format!("{path}.tree"))?,
    })
}

/// Converts a JSON node without native recursion; each node's path is only
/// materialized when reporting an error.
fn tree_from_value(root: &Value, root_path: &str) -> Result<AstTree> {
    enum Step<'a> {
        Enter(&'a Value, usize),
        Exit(String, usize),
    }
    // (parent slot, child index) for every visited node, for error paths.
    let mut trail: Vec<(usize, usize)> = vec![(usize::MAX, 0)];
    let path_of = |trail: &[(usize, usize)], mut slot: usize| {
        let mut indices = Vec::new();
        while trail[slot].0 != usize::MAX {
            indices.push(trail[slot].1);
            slot = trail[slot].0;
        }
        let mut p = root_path.to_string();
        for i in indices.iter().rev() {
            p.push_str(&format!(".children[{i}]"));
        }
        p
    };

    let mut steps = vec![Step::Enter(root, 0)];
    let mut built: Vec<AstTree> = Vec::new();
    while let Some(step) = steps.pop() {
        match step {
            Step::Enter(value, slot) => {
                let obj = value
                    .as_object()
                    .ok_or_else(|| Error::schema(path_of(&trail, slot), "node must be an object"))?;
                let label = match obj.get("label") {
                    Some(Value::String(s)) if !s.is_empty() => s.clone(),
                    _ => {
                        return Err(Error::schema(
                            format!("{}.label", path_of(&trail, slot)),
                            "missing or not a non-empty string",
                        ))
                    }
                };
                let children = match obj.get("children") {
                    Some(Value::Array(items)) => items,
                    _ => {
                        return Err(Error::schema(
                            format!("{}.children", path_of(&trail, slot)),
                            "missing or not an array",
                        ))
                    }
                };
                steps.push(Step::Exit(label, children.len()));
                for (i, child) in children.iter().enumerate().rev() {
                    trail.push((slot, i));
                    steps.push(Step::Enter(child, trail.len() - 1));
                }
            }
            Step::Exit(label, n) => {
                let children = built.split_off(built.len() - n);
                built.push(AstTree { label, children });
            }
        }
    }
    Ok(built.pop().expect("root node is always built"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"format_version": 1, "files": [
        {"file_id": "A.java", "project": "p", "version": "1", "label": 1,
         "tree": {"label": "CompilationUnit", "children": [{"label": "x", "children": []}]}},
        {"file_id": "B.java", "project": "p", "version": "1", "label": null,
         "tree": {"label": "CompilationUnit", "children": []}}
    ]}"#;

    #[test]
    fn loads_two_entries() {
        let recs = load_ast_document(TWO).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].label, Some(Label::Defective));
        assert_eq!(recs[1].label, None);
        assert_eq!(recs[0].tree.children[0].label, "x");
    }

    #[test]
    fn empty_file_list_is_valid() {
        let recs = load_ast_document(r#"{"format_version":1,"files":[]}"#).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn missing_children_names_node_path() {
        let doc = r#"{"format_version": 1, "files": [
            {"file_id": "A", "project": "p", "version": "1", "label": 0,
             "tree": {"label": "R", "children": [
                {"label": "a", "children": []},
                {"label": "b", "children": [{"label": "c"}]}]}}]}"#;
        let err = load_ast_document(doc).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "files[0].tree.children[1].children[0].children"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let doc = r#"{"format_version": 1, "files": [
            {"file_id": "A", "project": "p", "version": "1", "label": 0, "tree": {"label": "R", "children": []}},
            {"file_id": "A", "project": "p", "version": "1", "label": 1, "tree": {"label": "R", "children": []}}]}"#;
        assert!(matches!(load_ast_document(doc), Err(Error::DuplicateRecord { .. })));
    }

    #[test]
    fn bad_label_and_version() {
        let doc = r#"{"format_version": 1, "files": [
            {"file_id": "A", "project": "p", "version": "1", "label": 2, "tree": {"label": "R", "children": []}}]}"#;
        assert!(load_ast_document(doc).unwrap_err().to_string().contains("files[0].label"));
        assert!(load_ast_document(r#"{"format_version":2,"files":[]}"#).is_err());
    }

    #[test]
    fn write_then_load_matches() {
        let recs = load_ast_document(TWO).unwrap();
        let text = write_ast_document(&recs).unwrap();
        assert_eq!(load_ast_document(&text).unwrap(), recs);
    }

    #[test]
    fn deep_document_round_trips() {
        let mut t = AstTree::leaf("x");
        for _ in 0..20_000 {
            t = AstTree::node("-", vec![t]);
        }
        let rec = FileRecord {
            file_id: "deep".into(),
            project: "p".into(),
            version: "1".into(),
            label: Some(Label::Clean),
            tree: t,
        };
        let text = write_ast_document(std::slice::from_ref(&rec)).unwrap();
        let back = load_ast_document(&text).unwrap();
        assert_eq!(back[0].tree.depth(), 20_001);
    }
}
