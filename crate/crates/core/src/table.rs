//! Small helpers shared by the feature, prediction and report CSV formats.

use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: unexpected header `{found}`, expected {expected}")]
    Header { path: PathBuf, found: String, expected: String },
    #[error("{path}, line {line}: bad {column} value `{value}`: {reason}")]
    Value { path: PathBuf, line: u64, column: String, value: String, reason: String },
}

pub(crate) struct TableReader {
    pub path: PathBuf,
    pub headers: Vec<String>,
    reader: csv::Reader<fs::File>,
}

pub(crate) struct Row {
    pub line: u64,
    pub record: csv::StringRecord,
}

impl TableReader {
    pub fn open(path: &Path) -> Result<Self, TableError> {
        let file = fs::File::open(path).map_err(|source| TableError::Io { path: path.to_owned(), source })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers = reader
            .headers()
            .map_err(|source| TableError::Csv { path: path.to_owned(), source })?
            .iter()
            .map(str::to_owned)
            .collect();
        Ok(Self { path: path.to_owned(), headers, reader })
    }

    pub fn header_error(&self, expected: impl Into<String>) -> TableError {
        TableError::Header { path: self.path.clone(), found: self.headers.join(","), expected: expected.into() }
    }

    pub fn rows(&mut self) -> Result<Vec<Row>, TableError> {
        let path = self.path.clone();
        self.reader
            .records()
            .map(|r| {
                let record = r.map_err(|source| TableError::Csv { path: path.clone(), source })?;
                let line = record.position().map_or(0, |p| p.line());
                Ok(Row { line, record })
            })
            .collect()
    }

    pub fn value_error(&self, row: &Row, column: &str, value: &str, reason: impl Into<String>) -> TableError {
        TableError::Value {
            path: self.path.clone(),
            line: row.line,
            column: column.to_owned(),
            value: value.to_owned(),
            reason: reason.into(),
        }
    }
}

/// CSV writer with LF terminators.
pub(crate) fn writer(path: &Path) -> Result<csv::Writer<fs::File>, TableError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| TableError::Csv { path: path.to_owned(), source })
}

pub(crate) fn write_row<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<(), TableError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|source| TableError::Csv { path: path.to_owned(), source })
}

pub(crate) fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), TableError> {
    w.flush().map_err(|source| TableError::Io { path: path.to_owned(), source })
}
