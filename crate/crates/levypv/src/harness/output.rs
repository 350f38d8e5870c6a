//! Table writers for experiment artifacts.
//!
//! Every experiment emits `<prefix>_rows`, `<prefix>_summary` and
//! `<prefix>_meta.json`. Rows and summaries are deterministic byte-for-byte
//! for a fixed config: floats print with 17 significant digits, rows are
//! sorted by their natural key before writing, and the only timestamp lives
//! in the metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

/// One table cell; floats are rendered with a fixed 17-digit format so rows
/// are reproducible byte-for-byte.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    U64(u64),
    F64(f64),
    OptF64(Option<f64>),
    Bool(bool),
    Str(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::U64(v) => v.to_string(),
            Cell::F64(v) => format!("{v:.16e}"),
            Cell::OptF64(Some(v)) => format!("{v:.16e}"),
            Cell::OptF64(None) => String::new(),
            Cell::Bool(v) => v.to_string(),
            Cell::Str(v) => {
                debug_assert!(!v.contains([',', '\n', '"']), "cell needs no quoting");
                v.clone()
            }
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::U64(v) => Value::Number((*v).into()),
            Cell::F64(v) | Cell::OptF64(Some(v)) => {
                Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null)
            }
            Cell::OptF64(None) => Value::Null,
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Str(v) => Value::String(v.clone()),
        }
    }
}

/// A rectangular result table; the `schema_version` column is prepended to
/// every row so files are self-describing.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        let mut all = vec!["schema_version"];
        all.extend_from_slice(headers);
        Table { headers: all, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        let mut full = Vec::with_capacity(row.len() + 1);
        full.push(Cell::U64(SCHEMA_VERSION as u64));
        full.extend(row);
        assert_eq!(full.len(), self.headers.len(), "row width must match the header");
        self.rows.push(full);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut map = Map::new();
            for (h, c) in self.headers.iter().zip(row) {
                map.insert((*h).to_string(), c.json());
            }
            out.push_str(&Value::Object(map).to_string());
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Jsonl => self.to_jsonl(),
        }
    }

    /// Column values as floats (panics on non-numeric cells; test helper and
    /// summary plumbing only).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let idx = self
            .headers
            .iter()
            .position(|h| *h == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| match &r[idx] {
                Cell::U64(v) => *v as f64,
                Cell::F64(v) => *v,
                Cell::OptF64(v) => v.unwrap_or(f64::NAN),
                Cell::Bool(v) => f64::from(u8::from(*v)),
                Cell::Str(_) => panic!("column {name} is not numeric"),
            })
            .collect()
    }
}

/// Metadata sidecar; the only artifact holding wall-clock information.
#[derive(Debug, Serialize)]
pub struct MetaDoc<'a, C: Serialize> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub created_unix_ms: u128,
    pub config: &'a C,
    pub resolved: Value,
}

pub fn write_artifacts<C: Serialize>(
    prefix: &str,
    format: OutputFormat,
    rows: &Table,
    summary: &Table,
    config: &C,
    resolved: Value,
) -> Result<(PathBuf, PathBuf, PathBuf)> {
    if prefix.is_empty() {
        return Err(Error::config("output prefix must not be empty"));
    }
    let ext = format.extension();
    let rows_path = PathBuf::from(format!("{prefix}_rows.{ext}"));
    let summary_path = PathBuf::from(format!("{prefix}_summary.{ext}"));
    let meta_path = PathBuf::from(format!("{prefix}_meta.json"));
    if let Some(dir) = Path::new(prefix).parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(&rows_path, rows.render(format))?;
    fs::write(&summary_path, summary.render(format))?;
    let meta = MetaDoc {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        created_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        config,
        resolved,
    };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(&meta_path, text + "\n")?;
    Ok((rows_path, summary_path, meta_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> Table {
        let mut t = Table::new(&["n", "value", "flag", "note", "extra"]);
        t.push(vec![
            Cell::U64(1024),
            Cell::F64(0.5),
            Cell::Bool(true),
            Cell::Str("ok".into()),
            Cell::OptF64(None),
        ]);
        t.push(vec![
            Cell::U64(4096),
            Cell::F64(1.0 / 3.0),
            Cell::Bool(false),
            Cell::Str("x".into()),
            Cell::OptF64(Some(2.0)),
        ]);
        t
    }

    #[test]
    fn csv_uses_seventeen_digit_floats_and_stable_headers() {
        let csv = sample_table().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "schema_version,n,value,flag,note,extra");
        let row = lines.next().unwrap();
        assert!(row.starts_with("1,1024,5.0000000000000000e-1,true,ok,"));
        let row2 = lines.next().unwrap();
        assert!(row2.contains("3.3333333333333331e-1"), "row2 = {row2}");
    }

    #[test]
    fn jsonl_parses_back_with_nulls_for_missing_cells() {
        let jsonl = sample_table().to_jsonl();
        let first: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["n"], Value::from(1024));
        assert_eq!(first["extra"], Value::Null);
        assert_eq!(first["schema_version"], Value::from(1));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = sample_table().to_csv();
        let b = sample_table().to_csv();
        assert_eq!(a, b);
        assert_eq!(sample_table().to_jsonl(), sample_table().to_jsonl());
    }

    #[test]
    fn artifacts_land_under_the_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("exp/run1").to_string_lossy().into_owned();
        let t = sample_table();
        let (rows, summary, meta) = write_artifacts(
            &prefix,
            OutputFormat::Csv,
            &t,
            &t,
            &serde_json::json!({"demo": true}),
            serde_json::json!({"resolved": [1, 2]}),
        )
        .unwrap();
        assert!(rows.ends_with("run1_rows.csv"));
        assert!(summary.exists() && meta.exists());
        let meta_text = std::fs::read_to_string(meta).unwrap();
        assert!(meta_text.contains("\"schema_version\": 1"));
        assert!(meta_text.contains("created_unix_ms"));
    }
}
