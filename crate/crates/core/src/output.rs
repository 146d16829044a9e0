//! Run artifacts: flat CSV tables (comma, `.` decimal, header row, LF) and a
//! `report.json` carrying the metadata needed to replay the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sde::{TimeSeries, RNG_ALGORITHM};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip scientific notation, so equal doubles print equally.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// `t, energy, enstrophy, neg_sobolev, cutoff, dissipation` per output time.
pub fn series_table(series: &TimeSeries) -> Table {
    let mut t = Table::new(&[
        "t",
        "energy",
        "enstrophy",
        "neg_sobolev",
        "cutoff",
        "dissipation",
    ]);
    for r in &series.rows {
        t.push(
            [
                r.t,
                r.energy,
                r.enstrophy,
                r.neg_sobolev,
                r.cutoff,
                r.dissipation,
            ]
            .iter()
            .map(|x| fmt_f64(*x))
            .collect(),
        );
    }
    t
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Metadata {
    pub tool: String,
    pub code_version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub rng_algorithm: String,
    pub seed: u64,
    /// Wall-clock creation time; the only non-reproducible entry.
    pub created: String,
}

impl Metadata {
    pub fn new(subcommand: &str, config_hash: &str, seed: u64, created: String) -> Self {
        Self {
            tool: "tnoise".into(),
            code_version: CODE_VERSION.into(),
            subcommand: subcommand.into(),
            config_hash: config_hash.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            seed,
            created,
        }
    }
}

/// A named pass/fail record with the measured value and its bound.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            value: Some(value),
            bound: Some(bound),
            detail: format!("{} <= {}", fmt_f64(value), fmt_f64(bound)),
        }
    }

    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= bound,
            value: Some(value),
            bound: Some(bound),
            detail: format!("{} >= {}", fmt_f64(value), fmt_f64(bound)),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            bound: None,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub metadata: Metadata,
    pub config: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(metadata: Metadata, config: String, checks: Vec<Check>, results: T) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            metadata,
            config,
            passed,
            checks,
            results,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }
}

/// `<root>/<subcommand>-<first 12 hex digits of the config hash>`, created
/// if missing. Reruns of one configuration share a directory.
pub fn run_directory(root: &Path, subcommand: &str, config_hash: &str) -> Result<PathBuf> {
    let dir = root.join(format!(
        "{subcommand}-{}",
        &config_hash[..config_hash.len().min(12)]
    ));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
