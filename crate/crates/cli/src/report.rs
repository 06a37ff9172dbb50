use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    SkippedGuard,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::SkippedGuard => "skipped-guard",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub check: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub wall_time_ms: u128,
    pub verdicts: Vec<Check>,
}

impl ReportRecord {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

/// Hex SHA-256 of the compact JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A rectangular result set, written as CSV or as a JSON array of objects.
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj = self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), serde_json::Value::from(v.as_str())));
                serde_json::Value::Object(obj.collect())
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// Collects verdicts and writes files under one directory.
pub struct Session {
    dir: PathBuf,
    format: Format,
    outputs: Vec<String>,
    checks: Vec<Check>,
}

impl Session {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), format, outputs: Vec::new(), checks: Vec::new() })
    }

    pub fn verdict(&mut self, check: impl Into<String>, verdict: Verdict) {
        self.checks.push(Check { check: check.into(), verdict });
    }

    pub fn check(&mut self, check: impl Into<String>, ok: bool) {
        self.verdict(check, Verdict::of(ok));
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.columns)?;
                for r in &table.rows {
                    w.write_record(r)?;
                }
                let bytes = w.into_inner()?;
                self.write(&format!("{stem}.csv"), &bytes)
            }
            Format::Json => {
                let text = serde_json::to_string_pretty(&table.to_json())? + "\n";
                self.write(&format!("{stem}.json"), text.as_bytes())
            }
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text.as_bytes())
    }

    pub fn raw(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }

    pub fn absorb(&mut self, record: ReportRecord) {
        self.outputs.extend(record.outputs);
        self.checks.extend(record.verdicts);
    }

    pub fn finish(self, command: &str, config_hash: String, seed: Option<u64>, wall_time_ms: u128) -> Result<ReportRecord> {
        let record = ReportRecord {
            command: command.to_string(),
            config_hash,
            seed,
            outputs: self.outputs,
            wall_time_ms,
            verdicts: self.checks,
        };
        let text = serde_json::to_string_pretty(&record)? + "\n";
        fs::write(self.dir.join("report.json"), text)?;
        Ok(record)
    }
}
