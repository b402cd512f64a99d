use std::fs;
use std::path::Path;

use safedecode_core::harness::{ablation_table, GenerationReport};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const REPORT_FORMAT: &str = "safedecode-report";

/// Everything one `generate` or `compare` invocation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub command: String,
    pub reports: Vec<GenerationReport>,
    pub table: String,
}

impl RunReport {
    pub fn new(command: &str, reports: Vec<GenerationReport>, show_time: bool) -> Self {
        let table = ablation_table(&reports, show_time);
        Self {
            format: REPORT_FORMAT.into(),
            command: command.into(),
            reports,
            table,
        }
    }

    pub fn failed_runs(&self) -> usize {
        self.reports.iter().map(|r| r.failed_runs).sum()
    }

    pub fn total_runs(&self) -> usize {
        self.reports.iter().map(|r| r.records().count()).sum()
    }

    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
