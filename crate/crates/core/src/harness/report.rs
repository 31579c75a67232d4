//! Pass/fail report with named estimates, and merging of per-command reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SCHEMA_VERSION;

/// Suffix of per-command report files.
pub const REPORT_SUFFIX: &str = ".report.json";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("files carry different config hashes: {0:?} (pass --force to merge anyway)")]
    MixedHashes(Vec<(PathBuf, String)>),
    #[error("no report files found in {0}")]
    NothingToMerge(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// One pass/fail check tied to an acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    /// Human-readable pass condition, e.g. `< 0.01`.
    pub condition: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub flags: Vec<Flag>,
    pub estimates: Vec<Estimate>,
    pub runtime_secs: f64,
}

impl StatReport {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            flags: Vec::new(),
            estimates: Vec::new(),
            runtime_secs: 0.0,
        }
    }

    pub fn flag(&mut self, criterion: u8, name: impl Into<String>, value: f64, condition: impl Into<String>, passed: bool) {
        self.flags.push(Flag {
            criterion,
            name: name.into(),
            value,
            condition: condition.into(),
            passed,
        });
    }

    /// `value < limit`; NaN fails.
    pub fn flag_below(&mut self, criterion: u8, name: impl Into<String>, value: f64, limit: f64) {
        self.flag(criterion, name, value, format!("< {limit:e}"), value < limit);
    }

    /// `low <= value <= high`; NaN fails.
    pub fn flag_within(&mut self, criterion: u8, name: impl Into<String>, value: f64, low: f64, high: f64) {
        self.flag(criterion, name, value, format!("in [{low}, {high}]"), value >= low && value <= high);
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64) {
        self.estimates.push(Estimate {
            name: name.into(),
            value,
            ci: None,
        });
    }

    pub fn estimate_ci(&mut self, name: impl Into<String>, value: f64, ci: (f64, f64)) {
        self.estimates.push(Estimate {
            name: name.into(),
            value,
            ci: Some(ci),
        });
    }

    pub fn extend(&mut self, other: StatReport) {
        self.flags.extend(other.flags);
        self.estimates.extend(other.estimates);
        self.runtime_secs += other.runtime_secs;
    }

    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    /// Pass state per criterion: a criterion passes when all of its flags pass.
    pub fn by_criterion(&self) -> BTreeMap<u8, bool> {
        let mut out = BTreeMap::new();
        for f in &self.flags {
            *out.entry(f.criterion).or_insert(true) &= f.passed;
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = read_file(path)?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

fn read_file(path: &Path) -> Result<String, ReportError> {
    std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// File name of the merged report, which is not itself an input.
pub const MERGED_REPORT: &str = "report.json";

/// Every `config_hash` found in the top level of JSON files in `dir`,
/// skipping a previously merged report.
pub fn collect_hashes(dir: &Path) -> Result<Vec<(PathBuf, String)>, ReportError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|f| f != MERGED_REPORT))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let value: serde_json::Value = serde_json::from_str(&read_file(&p)?).map_err(|source| ReportError::Json {
            path: p.clone(),
            source,
        })?;
        if let Some(h) = value.get("config_hash").and_then(|h| h.as_str()) {
            out.push((p, h.to_string()));
        }
    }
    Ok(out)
}

/// Merge all `*.report.json` files of `dir` into one report.
///
/// Refuses when the JSON outputs in `dir` carry more than one config hash,
/// unless `force` is set.
pub fn merge_reports(dir: &Path, force: bool) -> Result<StatReport, ReportError> {
    let hashes = collect_hashes(dir)?;
    let mut distinct: Vec<&str> = hashes.iter().map(|(_, h)| h.as_str()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() > 1 && !force {
        return Err(ReportError::MixedHashes(hashes));
    }
    let reports: Vec<PathBuf> = hashes
        .iter()
        .map(|(p, _)| p.clone())
        .filter(|p| p.to_string_lossy().ends_with(REPORT_SUFFIX))
        .collect();
    if reports.is_empty() {
        return Err(ReportError::NothingToMerge(dir.to_path_buf()));
    }
    let hash = if distinct.len() == 1 {
        distinct[0].to_string()
    } else {
        "mixed".to_string()
    };
    let mut merged = StatReport::new("report", &hash);
    for p in reports {
        merged.extend(StatReport::load(&p)?);
    }
    Ok(merged)
}
