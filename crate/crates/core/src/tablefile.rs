//! Small delimited lookup files: lexicons, axis seed lists, ratings.
//!
//! Comma or tab separated, `#` comments and blank lines skipped. A first row
//! whose cells match the expected column names is treated as a header.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl TableFileError {
    pub fn format(path: &Path, line: usize, message: impl Into<String>) -> TableFileError {
        TableFileError::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: usize,
    pub cells: Vec<String>,
}

/// Rows with at least `min_cols` cells, trimmed. `header` names the leading
/// columns; a matching first row is dropped.
pub fn read_rows(path: &Path, min_cols: usize, header: &[&str]) -> Result<Vec<Row>, TableFileError> {
    let text = fs::read_to_string(path).map_err(|source| TableFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_rows(path, &text, min_cols, header)
}

pub fn parse_rows(path: &Path, text: &str, min_cols: usize, header: &[&str]) -> Result<Vec<Row>, TableFileError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let delim = if line.contains('\t') { '\t' } else { ',' };
        let cells: Vec<String> = line.split(delim).map(|c| c.trim().to_string()).collect();
        if rows.is_empty() && !header.is_empty() && cells.iter().zip(header).all(|(c, h)| c.eq_ignore_ascii_case(h)) {
            continue;
        }
        if cells.len() < min_cols || cells[..min_cols].iter().any(String::is_empty) {
            return Err(TableFileError::format(
                path,
                i + 1,
                format!("expected {min_cols} non-empty columns"),
            ));
        }
        rows.push(Row { line: i + 1, cells });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comments_and_tabs() {
        let text = "# lexicon\ntoken,category\nhappy,joy\n\nsad\tsadness\n";
        let rows = parse_rows(Path::new("x"), text, 2, &["token", "category"]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].cells, vec!["sad", "sadness"]);
        assert_eq!(rows[1].line, 5);
        let err = parse_rows(Path::new("x"), "happy\n", 2, &[]).unwrap_err();
        assert!(err.to_string().contains("x:1"));
    }
}
