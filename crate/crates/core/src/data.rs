//! CSV datasets with per-column nominal/quantitative typing.
//!
//! A column is quantitative (`Q`) when every non-empty cell parses as a
//! finite decimal number (plain or scientific notation, surrounding
//! whitespace ignored); otherwise it is nominal (`N`). Empty cells are kept
//! as absent values.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::ParamValue;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input is empty")]
    EmptyInput,
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("duplicate column header `{0}`")]
    DuplicateHeader(String),
    #[error("column `{0}` is not quantitative")]
    NotQuantitative(String),
    #[error("column `{0}` has no values")]
    AllEmpty(String),
    #[error("malformed csv: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataType {
    #[serde(rename = "N")]
    Nominal,
    #[serde(rename = "Q")]
    Quantitative,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Nominal => "N",
            DataType::Quantitative => "Q",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub dtype: DataType,
    pub cells: Vec<Option<ParamValue>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Column {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Min, max and non-empty count of a quantitative column.
    pub fn stats(&self) -> Result<ColumnStats, DataError> {
        if self.dtype != DataType::Quantitative {
            return Err(DataError::NotQuantitative(self.name.clone()));
        }
        let mut stats: Option<ColumnStats> = None;
        for v in self.cells.iter().flatten().filter_map(ParamValue::as_quantity) {
            let s = stats.get_or_insert(ColumnStats {
                min: v,
                max: v,
                count: 0,
            });
            s.min = s.min.min(v);
            s.max = s.max.max(v);
            s.count += 1;
        }
        stats.ok_or_else(|| DataError::AllEmpty(self.name.clone()))
    }
}

pub fn column_stats(column: &Column) -> Result<ColumnStats, DataError> {
    column.stats()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    /// Writes the dataset back out as CSV. Re-parsing the output yields an
    /// equal dataset.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        // writing into a Vec cannot fail
        writer.write_record(&header).expect("in-memory write");
        for row in 0..self.row_count() {
            let record: Vec<String> = self
                .columns
                .iter()
                .map(|c| match &c.cells[row] {
                    None => String::new(),
                    Some(ParamValue::Quantity(v)) => format!("{v}"),
                    Some(ParamValue::Token(t)) => t.clone(),
                })
                .collect();
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Parses a finite decimal number after trimming surrounding whitespace.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    // reject the textual specials `str::parse` accepts
    if t.is_empty() || t.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV bytes; the first record is the header.
pub fn parse_csv(name: &str, bytes: &[u8]) -> Result<Dataset, DataError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(DataError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| DataError::Malformed(e.to_string()))?,
        None => return Err(DataError::EmptyInput),
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(DataError::DuplicateHeader(n.clone()));
        }
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (index, record) in records.enumerate() {
        let record = record.map_err(|e| DataError::Malformed(e.to_string()))?;
        if record.len() != names.len() {
            return Err(DataError::RaggedRow {
                row: index + 2,
                expected: names.len(),
                found: record.len(),
            });
        }
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }

    let columns = names
        .into_iter()
        .zip(raw)
        .map(|(name, cells)| type_column(name, cells))
        .collect();
    Ok(Dataset {
        name: name.to_string(),
        columns,
    })
}

fn type_column(name: String, cells: Vec<String>) -> Column {
    let quantitative = cells
        .iter()
        .filter(|c| !c.trim().is_empty())
        .all(|c| parse_number(c).is_some());
    let cells = cells
        .into_iter()
        .map(|c| {
            if c.trim().is_empty() {
                None
            } else if quantitative {
                parse_number(&c).map(ParamValue::Quantity)
            } else {
                Some(ParamValue::Token(c))
            }
        })
        .collect();
    Column {
        name,
        dtype: if quantitative {
            DataType::Quantitative
        } else {
            DataType::Nominal
        },
        cells,
    }
}
