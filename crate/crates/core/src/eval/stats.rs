use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{FileRecord, Label};

/// One row of the per-project dataset summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectStats {
    pub project: String,
    pub versions: usize,
    pub files: usize,
    pub mean_files: f64,
    pub mean_defective: f64,
    /// Mean over versions of each version's defective percentage, rounded
    /// to two decimals.
    pub pct_defective: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Rows sorted by project name.
pub fn dataset_stats(records: &[FileRecord]) -> Vec<ProjectStats> {
    let mut by_project: BTreeMap<&str, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for r in records {
        let cell = by_project.entry(&r.project).or_default().entry(&r.version).or_default();
        cell.0 += 1;
        cell.1 += usize::from(r.label == Some(Label::Defective));
    }
    by_project
        .into_iter()
        .map(|(project, versions)| {
            let n = versions.len();
            let files: usize = versions.values().map(|v| v.0).sum();
            let defective: usize = versions.values().map(|v| v.1).sum();
            let pct: f64 = versions.values().map(|&(f, d)| 100.0 * d as f64 / f as f64).sum::<f64>() / n as f64;
            ProjectStats {
                project: project.to_string(),
                versions: n,
                files,
                mean_files: round2(files as f64 / n as f64),
                mean_defective: round2(defective as f64 / n as f64),
                pct_defective: round2(pct),
            }
        })
        .collect()
}

/// Fixed-width text table.
pub fn stats_table(rows: &[ProjectStats]) -> String {
    let mut out = format!(
        "{:<16} {:>9} {:>7} {:>11} {:>15} {:>12}\n",
        "project", "#versions", "#files", "mean_files", "mean_defective", "%defective"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>9} {:>7} {:>11.2} {:>15.2} {:>12.2}\n",
            r.project, r.versions, r.files, r.mean_files, r.mean_defective, r.pct_defective
        ));
    }
    out
}

pub fn stats_csv(rows: &[ProjectStats]) -> String {
    let mut out = String::from("project,versions,files,mean_files,mean_defective,pct_defective\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.2},{:.2},{:.2}\n",
            r.project, r.versions, r.files, r.mean_files, r.mean_defective, r.pct_defective
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AstTree;

    pub(crate) fn cell(project: &str, version: &str, files: usize, defective: usize) -> Vec<FileRecord> {
        (0..files)
            .map(|i| FileRecord {
                file_id: format!("F{i}"),
                project: project.into(),
                version: version.into(),
                label: Some(if i < defective { Label::Defective } else { Label::Clean }),
                tree: AstTree::leaf("CompilationUnit"),
            })
            .collect()
    }

    #[test]
    fn single_file() {
        let rows = dataset_stats(&cell("p", "1", 1, 1));
        assert_eq!(
            rows,
            [ProjectStats {
                project: "p".into(),
                versions: 1,
                files: 1,
                mean_files: 1.0,
                mean_defective: 1.0,
                pct_defective: 100.0
            }]
        );
    }

    #[test]
    fn versions_are_averaged() {
        let mut recs = cell("ivy", "1.4", 241, 16);
        recs.extend(cell("ivy", "2.0", 352, 40));
        let rows = dataset_stats(&recs);
        assert_eq!((rows[0].versions, rows[0].files), (2, 593));
        assert_eq!(rows[0].pct_defective, 9.0);
        assert!(stats_table(&rows).contains("9.00"));
        assert_eq!(stats_csv(&rows).lines().count(), 2);
    }
}
