//! Seeded generator of labeled mini-language files.
//!
//! Each file holds one `while` loop among filler statements. In a clean
//! file the loop body opens with an `if` guard; in a defective file it has
//! none. Fillers, which may contain `if`s of their own, come from the same
//! pool for both classes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{parse_mini, FileRecord, Label};
use crate::error::Result;
use crate::rng::{self, StreamRng};

const NAMES: &[&str] = &["i", "j", "n", "count", "total", "index", "size", "limit"];
const CALLS: &[&str] = &["read", "write", "log", "check", "flush"];
const OPS: &[&str] = &["+", "-", "*"];
const CMPS: &[&str] = &["<", ">", "<=", "!="];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub files: usize,
    pub seed: u64,
    pub project: String,
    pub version: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            files: 400,
            seed: 0,
            project: "synthetic".into(),
            version: "1.0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFile {
    pub file_id: String,
    pub source: String,
    pub label: Label,
}

struct Gen {
    rng: StreamRng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty pool")
    }

    fn atom(&mut self) -> String {
        if self.rng.gen_bool(0.6) {
            self.pick(NAMES).to_string()
        } else {
            self.rng.gen_range(0..100).to_string()
        }
    }

    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.atom(),
            1 => format!("{} {} {}", self.atom(), self.pick(OPS), self.atom()),
            2 => format!("{}({})", self.pick(CALLS), self.atom()),
            _ => format!("\"{}\"", self.pick(NAMES)),
        }
    }

    fn cond(&mut self) -> String {
        format!("{} {} {}", self.pick(NAMES), self.pick(CMPS), self.atom())
    }

    fn simple(&mut self) -> String {
        match self.rng.gen_range(0..3) {
            0 => format!("int {} = {};", self.pick(NAMES), self.expr()),
            1 => format!("{} = {};", self.pick(NAMES), self.expr()),
            _ => format!("{}({}, {});", self.pick(CALLS), self.atom(), self.atom()),
        }
    }

    fn filler(&mut self) -> String {
        if self.rng.gen_bool(0.2) {
            format!("if ({}) {{ {} }}", self.cond(), self.simple())
        } else {
            self.simple()
        }
    }

    fn body(&mut self, lo: usize, hi: usize) -> Vec<String> {
        let n = self.rng.gen_range(lo..=hi);
        (0..n).map(|_| self.simple()).collect()
    }

    fn while_loop(&mut self, guarded: bool) -> String {
        let mut stmts = self.body(1, 3);
        if guarded {
            let guard = format!("if ({}) {{ {} = 0; }}", self.cond(), self.pick(NAMES));
            stmts.insert(0, guard);
        }
        format!("while ({}) {{ {} }}", self.cond(), stmts.join(" "))
    }

    fn file(&mut self, defective: bool) -> String {
        let mut parts: Vec<String> = (0..self.rng.gen_range(1..=3)).map(|_| self.filler()).collect();
        parts.push(self.while_loop(!defective));
        if self.rng.gen_bool(0.5) {
            parts.push(self.filler());
        }
        parts.join("\n")
    }
}

/// Sources alternate defective / clean, so exactly half are defective when
/// `files` is even.
pub fn generate_sources(config: &SynthConfig) -> Vec<SynthFile> {
    let mut g = Gen {
        rng: rng::stream(config.seed, "synth"),
    };
    (0..config.files)
        .map(|i| {
            let defective = i % 2 == 0;
            SynthFile {
                file_id: format!("File{i:04}.mini"),
                source: g.file(defective),
                label: if defective { Label::Defective } else { Label::Clean },
            }
        })
        .collect()
}

pub fn synthetic_corpus(config: &SynthConfig) -> Result<Vec<FileRecord>> {
    generate_sources(config)
        .into_iter()
        .map(|f| {
            Ok(FileRecord {
                tree: parse_mini(&f.source)?,
                file_id: f.file_id,
                project: config.project.clone(),
                version: config.version.clone(),
                label: Some(f.label),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AstTree;

    fn loops_unguarded(tree: &AstTree) -> usize {
        let mut n = 0;
        let mut stack = vec![tree];
        while let Some(t) = stack.pop() {
            if t.label == "WhileStmt" {
                let block = t.children.last().unwrap();
                if block.children.first().map_or(true, |s| s.label != "IfStmt") {
                    n += 1;
                }
            }
            stack.extend(&t.children);
        }
        n
    }

    #[test]
    fn motif_marks_exactly_the_defective_files() {
        let recs = synthetic_corpus(&SynthConfig { files: 60, ..Default::default() }).unwrap();
        assert_eq!(recs.iter().filter(|r| r.label == Some(Label::Defective)).count(), 30);
        for r in &recs {
            assert_eq!(loops_unguarded(&r.tree) > 0, r.label == Some(Label::Defective), "{}", r.file_id);
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig { files: 10, seed: 4, ..Default::default() };
        assert_eq!(generate_sources(&cfg), generate_sources(&cfg));
        assert_ne!(generate_sources(&cfg), generate_sources(&SynthConfig { seed: 5, ..cfg.clone() }));
    }
}
