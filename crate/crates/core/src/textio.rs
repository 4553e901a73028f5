//! Plain-text table helpers shared by every file format.
//!
//! Files start with `# key: value` metadata rows followed by whitespace
//! separated numeric rows. Floats are written in shortest round-trip form.
//! Columns stored in a different unit than the in-memory value are read
//! back with [`read_scaled`], which picks the float whose scaled value
//! reproduces the text exactly, so write -> read -> write is a fixpoint.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered `key: value` metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a key, keeping first-insertion order.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let pos = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(pos).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: &Metadata) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn write_to(&self, out: &mut String) {
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Write `x * scale`.
pub fn fmt_scaled(x: f64, scale: f64) -> String {
    fmt_f64(x * scale)
}

/// Inverse of [`fmt_scaled`]: returns the float `x` with `x * scale`
/// equal to the parsed text value whenever one exists near `v / scale`.
pub fn read_scaled(value: f64, scale: f64) -> f64 {
    let guess = value / scale;
    if !guess.is_finite() || guess * scale == value {
        return guess;
    }
    let mut up = guess;
    let mut down = guess;
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        if up * scale == value {
            return up;
        }
        if down * scale == value {
            return down;
        }
    }
    guess
}

/// A parsed text table: metadata header plus numeric blocks separated by
/// blank lines. Each data row keeps its 1-based line number.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub metadata: Metadata,
    pub blocks: Vec<Vec<Row>>,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Row {
    pub fn float(&self, idx: usize, source: &str) -> Result<f64> {
        let field = self.fields.get(idx).ok_or_else(|| {
            Error::format(source, self.line, format!("missing column {}", idx + 1))
        })?;
        field.parse::<f64>().map_err(|_| {
            Error::format(source, self.line, format!("not a number: `{field}`"))
        })
    }

    pub fn expect_len(&self, n: usize, source: &str) -> Result<()> {
        if self.fields.len() != n {
            return Err(Error::format(
                source,
                self.line,
                format!("expected {n} columns, found {}", self.fields.len()),
            ));
        }
        Ok(())
    }
}

impl Table {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut table = Table::default();
        let mut current: Vec<Row> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                let rest = rest.trim();
                match rest.split_once(':') {
                    Some((k, v)) => table.metadata.set(k.trim(), v.trim()),
                    None if rest.is_empty() => {}
                    None => {
                        return Err(Error::format(
                            source,
                            line,
                            "metadata row must look like `# key: value`",
                        ))
                    }
                }
                continue;
            }
            if trimmed.is_empty() {
                if !current.is_empty() {
                    table.blocks.push(std::mem::take(&mut current));
                }
                continue;
            }
            current.push(Row {
                line,
                fields: trimmed.split_whitespace().map(str::to_owned).collect(),
            });
        }
        if !current.is_empty() {
            table.blocks.push(current);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn require(&self, key: &str, source: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .ok_or_else(|| Error::format(source, 1, format!("missing header `# {key}: ...`")))
    }

    pub fn require_f64(&self, key: &str, source: &str) -> Result<f64> {
        let v = self.require(key, source)?;
        v.parse()
            .map_err(|_| Error::format(source, 1, format!("header `{key}` is not a number: `{v}`")))
    }
}

/// Named numeric columns under a metadata header; the column names live in
/// `# columns:`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new(format: &str, columns: &[&str]) -> Self {
        Self {
            metadata: Metadata::new().with("format", format),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut meta = self.metadata.clone();
        meta.set("columns", self.columns.join(" "));
        meta.write_to(&mut out);
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let table = Table::parse(text, source)?;
        let mut metadata = table.metadata.clone();
        let columns: Vec<String> = metadata
            .remove("columns")
            .ok_or_else(|| Error::format(source, 1, "missing header `# columns: ...`"))?
            .split_whitespace()
            .map(str::to_owned)
            .collect();
        if table.blocks.len() > 1 {
            return Err(Error::format(source, table.blocks[1][0].line, "unexpected second data block"));
        }
        let mut rows = Vec::new();
        for row in table.blocks.iter().flatten() {
            row.expect_len(columns.len(), source)?;
            rows.push((0..columns.len()).map(|i| row.float(i, source)).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { metadata, columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metadata_keeps_order_and_replaces() {
        let mut m = Metadata::new().with("b", 1).with("a", 2);
        m.set("b", 3);
        let keys: Vec<_> = m.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["b", "a"]);
        assert_eq!(m.get("b"), Some("3"));
    }

    #[test]
    fn parse_blocks_and_header() {
        let t = Table::parse("# x: 1\n# y: two words\n1 2\n3 4\n\n5 6\n", "t").unwrap();
        assert_eq!(t.metadata.get("y"), Some("two words"));
        assert_eq!(t.blocks.len(), 2);
        assert_eq!(t.blocks[1][0].line, 6);
        let bad = Table::parse("# nocolon\n", "t");
        assert!(bad.is_err());
    }

    #[test]
    fn data_table_round_trip() {
        let mut t = DataTable::new("demo", &["x", "y"]);
        t.metadata.set("note", "two words");
        t.push(vec![0.1, -3e-20]);
        t.push(vec![1.0 / 3.0, 7.0]);
        let text = t.to_text();
        let back = DataTable::from_text(&text, "t").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.column("y").unwrap(), vec![-3e-20, 7.0]);
        assert!(DataTable::from_text("# columns: a b\n1\n", "t").is_err());
    }

    proptest! {
        #[test]
        fn fmt_round_trips(x in proptest::num::f64::NORMAL) {
            let s = fmt_f64(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }

        #[test]
        fn scaled_read_is_fixpoint(x in -1e-6f64..1e-6, k in prop_oneof![Just(1e9), Just(1.0 / (2.0 * std::f64::consts::PI * 1e12)), Just(0.3e30)]) {
            let s1 = fmt_scaled(x, k);
            let y = read_scaled(s1.parse().unwrap(), k);
            let s2 = fmt_scaled(y, k);
            prop_assert_eq!(s1, s2);
        }
    }
}
