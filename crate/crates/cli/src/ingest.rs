//! Collects records from source directories, single source files and AST
//! documents.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use astdefect::corpus::{check_unique, load_ast_document, parse_mini, FileRecord, Label};
use astdefect::{Error, Result};

use crate::config::read_input;

pub struct IngestOptions {
    pub project: Option<String>,
    pub version: String,
    pub extension: String,
    pub labels: BTreeMap<String, Label>,
    pub skip_bad: bool,
}

pub struct Ingested {
    pub records: Vec<FileRecord>,
    pub skipped: Vec<String>,
}

/// `file_id,label` lines with label 0 or 1. A first line whose label column
/// is not a bit is taken as a header.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>> {
    let text = read_input(path)?;
    let mut labels = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Input(format!("{}:{}: expected `file_id,label`", path.display(), n + 1));
        let (id, bit) = line.rsplit_once(',').ok_or_else(bad)?;
        let label = match bit.trim() {
            "0" => Label::Clean,
            "1" => Label::Defective,
            _ if n == 0 => continue,
            _ => return Err(bad()),
        };
        if labels.insert(id.trim().to_string(), label).is_some() {
            return Err(Error::Input(format!("{}: duplicate label for {}", path.display(), id.trim())));
        }
    }
    Ok(labels)
}

fn source_files(root: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut pending = vec![root.to_path_buf()];
    while let Some(dir) = pending.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == extension) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn file_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn default_project(path: &Path) -> String {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned());
    name(path)
        .or_else(|| path.canonicalize().ok().as_deref().and_then(name))
        .unwrap_or_else(|| "project".into())
}

fn parse_source(
    path: &Path,
    id: String,
    project: String,
    opts: &IngestOptions,
    records: &mut Vec<FileRecord>,
    failures: &mut Vec<String>,
) -> Result<()> {
    let source = read_input(path)?;
    match parse_mini(&source) {
        Ok(tree) => records.push(FileRecord {
            label: opts.labels.get(&id).copied(),
            file_id: id,
            project,
            version: opts.version.clone(),
            tree,
        }),
        Err(e) => failures.push(format!("{}: {e}", path.display())),
    }
    Ok(())
}

/// Reads every input. Parse failures are collected and either skipped or
/// returned together.
pub fn ingest(inputs: &[PathBuf], opts: &IngestOptions) -> Result<Ingested> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for input in inputs {
        if !input.exists() {
            return Err(Error::Input(format!("input {} does not exist", input.display())));
        }
        if input.is_dir() {
            let files = source_files(input, &opts.extension)?;
            if files.is_empty() {
                return Err(Error::Input(format!(
                    "directory {} holds no .{} files",
                    input.display(),
                    opts.extension
                )));
            }
            let project = opts.project.clone().unwrap_or_else(|| default_project(input));
            for f in files {
                parse_source(&f, file_id(input, &f), project.clone(), opts, &mut records, &mut failures)?;
            }
        } else if input.extension().is_some_and(|e| e == "json") {
            match load_ast_document(&read_input(input)?) {
                Ok(recs) => records.extend(recs),
                Err(e) if e.is_internal() => return Err(e),
                Err(e) => failures.push(format!("{}: {e}", input.display())),
            }
        } else {
            let parent = input.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let project = opts.project.clone().unwrap_or_else(|| default_project(parent));
            parse_source(input, file_id(parent, input), project, opts, &mut records, &mut failures)?;
        }
    }
    if !failures.is_empty() && !opts.skip_bad {
        return Err(Error::Input(format!(
            "{} input(s) failed to parse:\n  {}",
            failures.len(),
            failures.join("\n  ")
        )));
    }
    if records.is_empty() {
        return Err(Error::Input("no records were ingested".into()));
    }
    check_unique(&records)?;
    Ok(Ingested {
        records,
        skipped: failures,
    })
}
