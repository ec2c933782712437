use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Version stamped into every output header.
pub const VERSION: &str = concat!("otfs-radar ", env!("CARGO_PKG_VERSION"));

/// Column set revision; bumped whenever a table layout changes.
pub const SCHEMA: u32 = 1;

/// CSV table with a `# key: value` metadata header. No timestamps, so equal
/// inputs give byte-identical files.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: String,
    pub seed: u64,
    pub digest: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One CSV cell.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        if self.is_nan() {
            String::new()
        } else {
            format!("{self}")
        }
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for u64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        u8::from(*self).to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        (*self).to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::experiment::Cell::cell(&$v)),*]
    };
}

impl ResultTable {
    pub fn new(experiment: &str, seed: u64, digest: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            digest: digest.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the {} table", self.experiment);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column `name` parsed as numbers; empty cells become NaN.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }

    /// Rows whose cells equal the given `(column, value)` pairs.
    pub fn select(&self, filter: &[(&str, &str)]) -> Vec<&Vec<String>> {
        let idx: Vec<(usize, &str)> = filter.iter().filter_map(|(c, v)| self.column(c).map(|i| (i, *v))).collect();
        if idx.len() != filter.len() {
            return Vec::new();
        }
        self.rows.iter().filter(|r| idx.iter().all(|(i, v)| r[*i] == *v)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# version: {VERSION}");
        let _ = writeln!(s, "# schema: {SCHEMA}");
        let _ = writeln!(s, "# experiment: {}", self.experiment);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# config_sha256: {}", self.digest);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
