//! Tabular results and their on-disk form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    /// Fixed formatting so identical runs give identical files.
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) if x.is_nan() => "nan".into(),
            Value::Real(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Value::Real(x) => format!("{x:.10e}"),
            Value::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(x) => Some(*x),
            Value::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Int(x as i64)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

/// One CSV: a header row and rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header in {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column, NaN for text cells.
    pub fn f64_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Rows whose text column `name` equals `value`.
    pub fn filter<'a>(&'a self, name: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<Value>> + 'a {
        let i = self.column(name);
        self.rows
            .iter()
            .filter(move |r| i.is_some_and(|i| r[i].as_str() == Some(value)))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::render).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Everything a scenario produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub tables: Vec<ResultTable>,
    /// Named seeds, in the order they were derived.
    pub seeds: Vec<(String, u64)>,
    pub warnings: Vec<String>,
    /// Reported solutions whose solver hit the iteration limit.
    pub nonconverged: usize,
    pub violations: Vec<String>,
}

impl RunOutput {
    pub fn new(scenario: Scenario, master_seed: u64) -> Self {
        Self {
            scenario,
            tables: Vec::new(),
            seeds: vec![("master".into(), master_seed)],
            warnings: Vec::new(),
            nonconverged: 0,
            violations: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn manifest(&self, config: &ExperimentConfig) -> String {
        let mut m = String::new();
        let _ = writeln!(m, "tool = gfdmcr {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "scenario = {}", self.scenario.name());
        let _ = writeln!(m, "config_sha256 = {}", config.hash());
        for (name, seed) in &self.seeds {
            let _ = writeln!(m, "seed.{name} = {seed}");
        }
        let _ = writeln!(m, "nonconverged = {}", self.nonconverged);
        for t in &self.tables {
            let _ = writeln!(m, "output = {}.csv ({} rows)", t.name, t.rows.len());
        }
        for w in &self.warnings {
            let _ = writeln!(m, "warning = {w}");
        }
        for v in &self.violations {
            let _ = writeln!(m, "violation = {v}");
        }
        m.push_str("\n# resolved configuration\n");
        m.push_str(&config.canonical());
        m
    }

    /// Writes every table as `<name>.csv` and a `manifest.txt` into `dir`.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            let file = std::fs::File::create(&path)?;
            let mut w = std::io::BufWriter::new(file);
            t.write_csv(&mut w)?;
            w.flush()?;
            written.push(path);
        }
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.manifest(config)).map_err(Error::Io)?;
        written.push(path);
        Ok(written)
    }
}

/// Mean and standard error of the mean; the error is NaN below two samples.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_fixed_format() {
        let mut t = ResultTable::new("x", &["a", "b", "c"]);
        t.push(vec![1.5.into(), 3usize.into(), "mf".into()]);
        t.push(vec![f64::NEG_INFINITY.into(), true.into(), "zf".into()]);
        assert_eq!(t.to_csv_string(), "a,b,c\n1.5000000000e0,3,mf\n-inf,1,zf\n");
        assert_eq!(t.f64_column("a").unwrap()[0], 1.5);
        assert_eq!(t.filter("c", "zf").count(), 1);
    }

    #[test]
    #[should_panic]
    fn rejects_ragged_rows() {
        let mut t = ResultTable::new("x", &["a", "b"]);
        t.push(vec![1.0.into()]);
    }

    #[test]
    fn mean_and_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_se(&[1.0]).1.is_nan());
    }

    #[test]
    fn writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let mut out = RunOutput::new(Scenario::Psd, 9);
        let mut t = ResultTable::new("metric", &["x"]);
        t.push(vec![2.0.into()]);
        out.tables.push(t);
        let files = out.write(dir.path(), &cfg).unwrap();
        assert_eq!(files.len(), 2);
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(manifest.contains(&cfg.hash()));
        assert!(manifest.contains("seed.master = 9"));
        assert!(manifest.contains(env!("CARGO_PKG_VERSION")));
    }
}
