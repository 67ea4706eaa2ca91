//! Rectangular categorical data.
//!
//! A [`Dataset`] is an immutable table of trimmed, non-empty text cells. The
//! column order of a dataset is the variable order of any tree built from
//! it, so [`Dataset::select_columns`] doubles as the way to choose the
//! tree's level order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reader and writer options for delimited text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub header: bool,
    pub separator: u8,
    pub quote: u8,
    pub exclude_first_column: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            header: true,
            separator: b',',
            quote: b'"',
            exclude_first_column: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeGranularity {
    Date,
    MonthYear,
    Year,
}

impl FromStr for TimeGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "date" => Ok(Self::Date),
            "month-year" | "monthyear" => Ok(Self::MonthYear),
            "year" => Ok(Self::Year),
            other => Err(Error::Config(format!(
                "unknown time granularity `{other}` (expected date, month-year or year)"
            ))),
        }
    }
}

/// A column holding time stamps, with the granularity and `%`-style format
/// used to read them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeColumn {
    pub column: String,
    pub granularity: TimeGranularity,
    pub format: String,
}

impl TimeColumn {
    pub fn new(
        column: impl Into<String>,
        granularity: TimeGranularity,
        format: impl Into<String>,
    ) -> Self {
        let mut format = format.into();
        if format.is_empty() {
            format = match granularity {
                TimeGranularity::Date => "%Y-%m-%d",
                TimeGranularity::MonthYear => "%Y-%m",
                TimeGranularity::Year => "%Y",
            }
            .to_string();
        }
        Self {
            column: column.into(),
            granularity,
            format,
        }
    }

    /// Parses a value to the first day of the period it denotes.
    pub fn parse_value(&self, value: &str) -> std::result::Result<NaiveDate, String> {
        let value = value.trim();
        let parsed = match self.granularity {
            TimeGranularity::Date => NaiveDate::parse_from_str(value, &self.format),
            TimeGranularity::MonthYear => NaiveDate::parse_from_str(
                &format!("{value}|01"),
                &format!("{}|%d", self.format),
            ),
            TimeGranularity::Year => NaiveDate::parse_from_str(
                &format!("{value}|01|01"),
                &format!("{}|%m|%d", self.format),
            ),
        };
        parsed.map_err(|e| format!("`{value}` does not match `{}`: {e}", self.format))
    }
}

/// A reference to a column, by name or by 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Reads a selector; text made only of digits is taken as a 1-based index.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(i) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => Self::Index(i),
            _ => Self::Name(s.to_string()),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(n) => f.write_str(n),
            ColumnRef::Index(i) => write!(f, "{i}"),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

/// Row filter over the declared area and time columns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    /// Areas to keep. Empty keeps every area.
    #[serde(default)]
    pub areas: BTreeSet<String>,
    /// Inclusive range, written in the time column's format.
    #[serde(default)]
    pub time_range: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    area_column: Option<String>,
    time_column: Option<TimeColumn>,
}

impl Dataset {
    /// Builds a dataset, trimming every cell. Rows must be complete.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        let columns: Vec<String> = columns.into_iter().map(|c| c.trim().to_string()).collect();
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.is_empty() {
                return Err(Error::validation("empty column name"));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::validation(format!("duplicate column name `{c}`")));
            }
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
            let row: Vec<String> = row.into_iter().map(|v| v.trim().to_string()).collect();
            if let Some(j) = row.iter().position(|v| v.is_empty()) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("missing value in column `{}`", columns[j]),
                });
            }
            clean.push(row);
        }
        Ok(Self {
            columns,
            rows: clean,
            area_column: None,
            time_column: None,
        })
    }

    pub fn load_csv<R: Read>(mut source: R, options: &CsvOptions) -> Result<Self> {
        let mut text = Vec::new();
        source.read_to_end(&mut text)?;
        Self::from_csv_bytes(&text, options)
    }

    pub fn from_csv_str(text: &str, options: &CsvOptions) -> Result<Self> {
        Self::from_csv_bytes(text.as_bytes(), options)
    }

    pub fn from_csv_bytes(text: &[u8], options: &CsvOptions) -> Result<Self> {
        if text.iter().all(|b| b.is_ascii_whitespace()) {
            return Err(Error::EmptyInput);
        }
        check_quotes(text, options)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .delimiter(options.separator)
            .quote(options.quote)
            .flexible(true)
            .from_reader(text);

        let mut records = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: i,
                message: e.to_string(),
            })?;
            // Blank lines between records are skipped by the reader; a
            // single empty field is a blank line in a one-column file.
            if rec.len() == 1 && rec[0].trim().is_empty() {
                continue;
            }
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let mut records = records.into_iter();
        let (columns, first_row) = if options.header {
            let header = records.next().ok_or(Error::EmptyInput)?;
            (header, 1)
        } else {
            let peek: Vec<Vec<String>> = records.collect();
            let n = peek.first().map(Vec::len).ok_or(Error::EmptyInput)?;
            let names = (1..=n).map(|i| format!("V{i}")).collect();
            records = peek.into_iter();
            (names, 1)
        };
        let width = columns.len();
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            if rec.len() != width {
                return Err(Error::Parse {
                    row: first_row + i,
                    message: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            rows.push(rec);
        }
        let (columns, rows) = if options.exclude_first_column {
            if width < 2 {
                return Err(Error::validation(
                    "cannot drop the first column of a single-column table",
                ));
            }
            (
                columns[1..].to_vec(),
                rows.into_iter().map(|r| r[1..].to_vec()).collect(),
            )
        } else {
            (columns, rows)
        };
        Self::new(columns, rows)
    }

    /// Writes the table back as delimited text. Row names are never written,
    /// so `exclude_first_column` is ignored here.
    pub fn write_csv<W: Write>(&self, sink: W, options: &CsvOptions) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(options.separator)
            .quote(options.quote)
            .from_writer(sink);
        let io = |e: csv::Error| Error::Io(e.to_string());
        if options.header {
            writer.write_record(&self.columns).map_err(io)?;
        }
        for row in &self.rows {
            writer.write_record(row).map_err(io)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, options: &CsvOptions) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, options)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("cells are utf-8")
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn area_column(&self) -> Option<&str> {
        self.area_column.as_deref()
    }

    pub fn time_column(&self) -> Option<&TimeColumn> {
        self.time_column.as_ref()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::lookup("column", name))
    }

    fn resolve(&self, column: &ColumnRef) -> Result<usize> {
        match column {
            ColumnRef::Name(n) => self.column_index(n),
            ColumnRef::Index(i) if *i >= 1 && *i <= self.columns.len() => Ok(i - 1),
            ColumnRef::Index(i) => Err(Error::lookup("column", i.to_string())),
        }
    }

    pub fn with_area_column(mut self, column: Option<&str>) -> Result<Self> {
        if let Some(c) = column {
            self.column_index(c)?;
        }
        self.area_column = column.map(str::to_string);
        Ok(self)
    }

    /// Declares the time column. Every value must parse under its format.
    pub fn with_time_column(mut self, time: Option<TimeColumn>) -> Result<Self> {
        if let Some(t) = &time {
            let idx = self.column_index(&t.column)?;
            for (i, row) in self.rows.iter().enumerate() {
                t.parse_value(&row[idx])
                    .map_err(|message| Error::Parse { row: i + 1, message })?;
            }
        }
        self.time_column = time;
        Ok(self)
    }

    /// Distinct values of a column in byte-wise lexicographic order.
    pub fn levels(&self, column: &str) -> Result<Vec<String>> {
        let idx = self.column_index(column)?;
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r[idx].as_str()).collect();
        Ok(set.into_iter().map(str::to_string).collect())
    }

    /// Row counts per value of a column.
    pub fn value_counts(&self, column: &str) -> Result<BTreeMap<String, usize>> {
        let idx = self.column_index(column)?;
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row[idx].clone()).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Keeps exactly the requested columns in the requested order.
    pub fn select_columns(&self, columns: &[ColumnRef]) -> Result<Self> {
        let mut indices = Vec::with_capacity(columns.len());
        for c in columns {
            let idx = self.resolve(c)?;
            if indices.contains(&idx) {
                return Err(Error::validation(format!(
                    "column `{}` requested more than once",
                    self.columns[idx]
                )));
            }
            indices.push(idx);
        }
        if indices.is_empty() {
            return Err(Error::validation("no columns selected"));
        }
        let names: Vec<String> = indices.iter().map(|&i| self.columns[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| indices.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Self {
            area_column: self.area_column.clone().filter(|a| names.contains(a)),
            time_column: self
                .time_column
                .clone()
                .filter(|t| names.contains(&t.column)),
            columns: names,
            rows,
        })
    }

    /// Drops rows outside the area subset or the inclusive time range.
    pub fn filter_rows(&self, filter: &RowFilter) -> Result<Self> {
        let area_idx = if filter.areas.is_empty() {
            None
        } else {
            let col = self.area_column.as_deref().ok_or_else(|| {
                Error::Config("area filter given but no area column is declared".into())
            })?;
            Some(self.column_index(col)?)
        };
        let time = match &filter.time_range {
            None => None,
            Some((start, end)) => {
                let t = self.time_column.as_ref().ok_or_else(|| {
                    Error::Config("time range given but no time column is declared".into())
                })?;
                let parse_end = |v: &str| {
                    t.parse_value(v)
                        .map_err(|m| Error::Config(format!("time range endpoint: {m}")))
                };
                let (lo, hi) = (parse_end(start)?, parse_end(end)?);
                Some((self.column_index(&t.column)?, t, lo, hi))
            }
        };
        let mut rows = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(idx) = area_idx {
                if !filter.areas.contains(&row[idx]) {
                    continue;
                }
            }
            if let Some((idx, t, lo, hi)) = &time {
                let at = t
                    .parse_value(&row[*idx])
                    .map_err(|message| Error::Parse { row: i + 1, message })?;
                if at < *lo || at > *hi {
                    continue;
                }
            }
            rows.push(row.clone());
        }
        Ok(Self {
            rows,
            ..self.clone()
        })
    }

    /// Order-free digest of the rows restricted to `columns`. Two datasets
    /// holding the same multiset of rows over the same named columns get the
    /// same fingerprint regardless of column or row order.
    pub fn fingerprint(&self, columns: &[String]) -> Result<String> {
        let mut named: Vec<(&str, usize)> = columns
            .iter()
            .map(|c| Ok((c.as_str(), self.column_index(c)?)))
            .collect::<Result<_>>()?;
        named.sort();
        let mut lines: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                named
                    .iter()
                    .map(|(n, i)| format!("{n}={}", r[*i]))
                    .collect::<Vec<_>>()
                    .join("\u{1f}")
            })
            .collect();
        lines.sort();
        let mut hasher = Sha256::new();
        for l in &lines {
            hasher.update(l.as_bytes());
            hasher.update(b"\n");
        }
        Ok(hex::encode(hasher.finalize()))
    }
}

/// Reports an opening quote that is never closed, with the data row it
/// starts on.
fn check_quotes(text: &[u8], options: &CsvOptions) -> Result<()> {
    let (sep, quote) = (options.separator, options.quote);
    let mut record = 0usize;
    let mut at_field_start = true;
    let mut open_at: Option<usize> = None;
    let mut i = 0;
    while i < text.len() {
        let b = text[i];
        if open_at.is_some() {
            if b == quote {
                if text.get(i + 1) == Some(&quote) {
                    i += 1;
                } else {
                    open_at = None;
                }
            }
        } else if b == quote && at_field_start {
            open_at = Some(record);
        } else if b == b'\n' {
            record += 1;
            at_field_start = true;
            i += 1;
            continue;
        }
        at_field_start = open_at.is_none() && b == sep;
        i += 1;
    }
    match open_at {
        Some(rec) => Err(Error::Parse {
            row: if options.header { rec } else { rec + 1 },
            message: "unbalanced quote".into(),
        }),
        None => Ok(()),
    }
}
