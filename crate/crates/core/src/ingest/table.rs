use std::path::Path;

use crate::error::{Error, Result};

/// A delimited text table with a header row. Cells are decoded as UTF-8,
/// falling back to Latin-1 byte-for-byte; tabs and newlines inside cells
/// become spaces so values can be written to the tab-separated vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn decode_cell(bytes: &[u8]) -> String {
    let s = match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    };
    s.replace(['\t', '\n', '\r'], " ")
}

impl Table {
    pub fn read(path: &Path, delimiter: u8) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, delimiter)
    }

    pub fn from_reader(reader: impl std::io::Read, delimiter: u8) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr.byte_headers()?.iter().map(decode_cell).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.byte_records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            rows.push(rec.iter().map(decode_cell).collect());
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column positions for `names`; the error lists every missing one.
    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        let missing: Vec<String> = names
            .iter()
            .filter(|n| self.column(n).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingColumns(missing));
        }
        Ok(names.iter().map(|n| self.column(n).unwrap()).collect())
    }
}

/// Quantile buckets for a numeric column. Values that do not parse as a
/// finite number land in the `na` bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucketizer {
    /// Upper-exclusive cut points, ascending and distinct.
    pub edges: Vec<f64>,
}

impl Bucketizer {
    pub fn fit<'a>(values: impl Iterator<Item = &'a str>, bins: usize) -> Self {
        let mut nums: Vec<f64> = values
            .filter_map(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .collect();
        nums.sort_by(f64::total_cmp);
        let mut edges = Vec::new();
        if bins > 1 && !nums.is_empty() {
            for q in 1..bins {
                let pos = (q * nums.len()) / bins;
                let e = nums[pos.min(nums.len() - 1)];
                if edges.last().is_none_or(|&last| e > last) {
                    edges.push(e);
                }
            }
        }
        Self { edges }
    }

    pub fn bucket(&self, raw: &str) -> String {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => {
                let b = self.edges.iter().take_while(|&&e| v >= e).count();
                format!("q{b}")
            }
            _ => "na".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_semicolon_quoted_latin1() {
        let data = b"\"User-ID\";\"Age\"\n\"1\";\"caf\xe9\"\n\"2\";\"NULL\"\n";
        let t = Table::from_reader(&data[..], b';').unwrap();
        assert_eq!(t.header, vec!["User-ID", "Age"]);
        assert_eq!(t.rows[0][1], "café");
    }

    #[test]
    fn ragged_row_reports_number() {
        let data = "a,b\n1,2\n3\n";
        let err = Table::from_reader(data.as_bytes(), b',').unwrap_err();
        assert!(err.to_string().starts_with("row 2"), "{err}");
    }

    #[test]
    fn missing_columns_named() {
        let t = Table::from_reader("a,b\n1,2\n".as_bytes(), b',').unwrap();
        let err = t
            .columns(&["a".into(), "x".into(), "y".into()])
            .unwrap_err();
        assert_eq!(err.to_string(), "missing columns: x, y");
    }

    #[test]
    fn quantile_buckets() {
        let vals: Vec<String> = (1..=100).map(|v| v.to_string()).collect();
        let b = Bucketizer::fit(vals.iter().map(String::as_str), 4);
        assert_eq!(b.edges, vec![26.0, 51.0, 76.0]);
        assert_eq!(b.bucket("1"), "q0");
        assert_eq!(b.bucket("26"), "q1");
        assert_eq!(b.bucket("100"), "q3");
        assert_eq!(b.bucket("NULL"), "na");
    }
}
