//! Report container and deterministic file emission.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::kpi::KpiAnnotation;
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";

/// One CSV file: header plus pre-formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file_name: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvTable {
    pub fn new(file_name: impl Into<String>, header: impl Into<String>) -> Self {
        CsvTable { file_name: file_name.into(), header: header.into(), rows: Vec::new() }
    }

    /// File body with the leading provenance comment.
    pub fn render(&self, fingerprint: &str, seed: u64) -> String {
        let mut out = format!("# fingerprint={fingerprint} seed={seed}\n{}\n", self.header);
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub fingerprint: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub summary: serde_json::Value,
    pub kpi: Vec<KpiAnnotation>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<CsvTable>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, summary: impl Serialize) -> Result<Self> {
        let summary = serde_json::to_value(summary).map_err(|e| Error::Config(e.to_string()))?;
        Ok(ExperimentReport {
            experiment: config.experiment,
            fingerprint: config.fingerprint(),
            seed: config.seed,
            config: ExperimentConfig { output: None, ..config.clone() },
            summary,
            kpi: Vec::new(),
            warnings: Vec::new(),
            files: Vec::new(),
            tables: Vec::new(),
        })
    }

    pub fn add_table(&mut self, table: CsvTable) {
        self.files.push(table.file_name.clone());
        self.tables.push(table);
    }

    pub fn table(&self, file_name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.file_name == file_name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes every table and `report.json` into `dir`, creating it if
    /// needed. Refuses to overwrite outputs of a different configuration.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if let Some(existing) = existing_fingerprint(dir)? {
            if existing != self.fingerprint {
                return Err(Error::Config(format!(
                    "{} holds results of another configuration (fingerprint {existing})",
                    dir.display()
                )));
            }
        }
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(dir.join(&t.file_name), t.render(&self.fingerprint, self.seed))?;
        }
        fs::write(dir.join(REPORT_FILE), self.to_json())?;
        Ok(())
    }
}

/// Fingerprint and seed from the comment line of an emitted CSV.
pub fn read_csv_provenance(path: &Path) -> Result<(String, u64)> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let bad = || Error::Config(format!("{} has no provenance line", path.display()));
    let rest = first.trim().strip_prefix("# fingerprint=").ok_or_else(bad)?;
    let (fp, seed) = rest.split_once(" seed=").ok_or_else(bad)?;
    Ok((fp.to_string(), seed.parse().map_err(|_| bad())?))
}

/// Fingerprint recorded in `dir/report.json`, if present.
pub fn existing_fingerprint(dir: &Path) -> Result<Option<String>> {
    let path = dir.join(REPORT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(value.get("fingerprint").and_then(|v| v.as_str()).map(str::to_string))
}

/// Checks that every CSV in `dir` named by its report was produced by
/// `config`.
pub fn verify_outputs(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    let expected = config.fingerprint();
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let files = value.get("files").and_then(|f| f.as_array()).cloned().unwrap_or_default();
    for f in files.iter().filter_map(|f| f.as_str()) {
        let (fp, seed) = read_csv_provenance(&dir.join(f))?;
        if fp != expected || seed != config.seed {
            return Err(Error::Config(format!(
                "{f}: fingerprint {fp} seed {seed} does not match {expected} seed {}",
                config.seed
            )));
        }
    }
    Ok(())
}
