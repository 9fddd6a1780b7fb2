//! Run reports: one JSON document plus CSV mirrors of its tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold, detail: detail.into() }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value: f64::from(u8::from(!passed)), threshold: 0.0, detail: detail.into() }
    }
}

/// A CSV table; cells are preformatted so reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table { name: name.to_string(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// `{:e}`-style cell with full precision.
pub fn cell(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub meta: Meta,
    pub checks: Vec<Check>,
    pub data: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Human-readable lines printed before the checks in text mode.
    #[serde(skip)]
    pub summary: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["name", "passed", "value", "threshold", "detail"]);
        for c in &self.checks {
            t.push(vec![c.name.clone(), c.passed.to_string(), cell(c.value), cell(c.threshold), c.detail.clone()]);
        }
        t
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for line in &self.summary {
            let _ = writeln!(s, "{line}");
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag}  {}: {} (value {:.3e}, threshold {:.3e})", c.name, c.detail, c.value, c.threshold);
        }
        let n_fail = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), n_fail);
        s
    }

    /// `report.json`, `checks.csv` and one CSV per table.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        write_csv(&dir.join("checks.csv"), &self.checks_table())?;
        for t in &self.tables {
            write_csv(&dir.join(format!("{}.csv", t.name)), t)?;
        }
        Ok(())
    }
}

pub fn csv_string(t: &Table) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.headers).expect("in-memory write");
    for r in &t.rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

fn write_csv(path: &Path, t: &Table) -> std::io::Result<()> {
    std::fs::write(path, csv_string(t))
}
