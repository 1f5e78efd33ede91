//! Consolidated summary over the check reports in an output directory:
//! one row per check, failures sorted first, encodable as CSV or JSON with
//! identical content.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use heatlab_core::io::{self, IoError};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("no check reports under {0}")]
    Empty(String),
    #[error("cannot scan {path}: {source}")]
    Scan {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Report(#[from] IoError),
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub fitted_constants: BTreeMap<String, f64>,
}

/// Reads every `check_*.json` under `dir` (or `dir/reports`), one row per
/// report, sorted fail-first and then by name and file for determinism.
pub fn collect_rows(dir: &Path) -> Result<Vec<TableRow>, TableError> {
    let reports = dir.join("reports");
    let scan = if reports.is_dir() {
        reports
    } else {
        dir.to_path_buf()
    };
    let mut files: Vec<PathBuf> = match std::fs::read_dir(&scan) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with("check_") && s.ends_with(".json"))
            })
            .collect(),
        Err(source) => {
            return Err(TableError::Scan {
                path: scan.display().to_string(),
                source,
            })
        }
    };
    files.sort();
    let mut rows: Vec<(PathBuf, TableRow)> = Vec::with_capacity(files.len());
    for file in files {
        let rep = io::read_check_report_json(&file)?;
        rows.push((
            file,
            TableRow {
                name: rep.name,
                pass: rep.pass,
                margin: rep.margin,
                fitted_constants: rep.fitted_constants,
            },
        ));
    }
    if rows.is_empty() {
        return Err(TableError::Empty(scan.display().to_string()));
    }
    rows.sort_by(|(fa, a), (fb, b)| {
        a.pass
            .cmp(&b.pass)
            .then_with(|| a.name.cmp(&b.name))
            .then_with(|| fa.cmp(fb))
    });
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

pub fn to_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("name,pass,margin,fitted_constants\n");
    for row in rows {
        let constants: Vec<String> = row
            .fitted_constants
            .iter()
            .map(|(k, v)| format!("{k}={}", io::fmt_f64(*v)))
            .collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.name,
            row.pass,
            io::fmt_f64(row.margin),
            constants.join(";")
        ));
    }
    out
}

pub fn to_json(rows: &[TableRow]) -> String {
    let mut out = serde_json::to_string_pretty(rows).expect("static row shape");
    out.push('\n');
    out
}
