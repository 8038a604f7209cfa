use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::quarter::Quarter;
use crate::error::{Error, Result};

/// A quarterly series; `NaN` marks a missing observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub start: Quarter,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(start: Quarter, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last quarter covered by the storage (missing or not).
    pub fn end(&self) -> Quarter {
        self.start + (self.values.len() as i64 - 1)
    }

    /// Value at `q`, or `NaN` outside the stored range.
    pub fn get(&self, q: Quarter) -> f64 {
        let i = q.since(self.start);
        if i < 0 {
            return f64::NAN;
        }
        self.values.get(i as usize).copied().unwrap_or(f64::NAN)
    }

    /// Values re-indexed onto `len` quarters starting at `start`.
    pub fn aligned(&self, start: Quarter, len: usize) -> Vec<f64> {
        (0..len).map(|i| self.get(start + i as i64)).collect()
    }

    /// First and last quarter holding a finite value.
    pub fn valid_range(&self) -> Option<(Quarter, Quarter)> {
        let first = self.values.iter().position(|v| v.is_finite())?;
        let last = self.values.iter().rposition(|v| v.is_finite())?;
        Some((self.start + first as i64, self.start + last as i64))
    }

    pub fn quarters(&self) -> impl Iterator<Item = Quarter> + '_ {
        (0..self.values.len()).map(move |i| self.start + i as i64)
    }

    /// Writes a two-column `quarter,<name>` file with full double precision.
    pub fn write_csv<W: Write>(&self, name: &str, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["quarter", name])?;
        for (q, v) in self.quarters().zip(&self.values) {
            let cell = if v.is_finite() { format!("{v:?}") } else { String::new() };
            w.write_record([q.to_string(), cell])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a two-column quarter/value file as written by [`Series::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<(String, Series)> {
        let ds = load_dataset_from_reader(reader, &Schema::default())?;
        let mut names = ds.names();
        let name = match (names.next(), names.next()) {
            (Some(n), None) => n.to_string(),
            _ => {
                return Err(Error::Ingestion {
                    row: 1,
                    message: "expected exactly one value column".into(),
                })
            }
        };
        let series = ds.series(&name)?;
        Ok((name, series))
    }
}

/// Column selection for [`load_dataset`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    /// Header of the quarter column.
    pub quarter_column: String,
    /// File column -> series name. Empty means every non-quarter column under
    /// its own header.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            quarter_column: "quarter".into(),
            columns: BTreeMap::new(),
            delimiter: ',',
        }
    }
}

/// Aligned named series over one contiguous quarter range.
///
/// Missing values (`NaN`) only appear at the edges of a series, so any
/// estimation window is the intersection of the series' valid ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    start: Quarter,
    len: usize,
    series: BTreeMap<String, Vec<f64>>,
}

impl Dataset {
    pub fn new(start: Quarter, len: usize) -> Self {
        Self {
            start,
            len,
            series: BTreeMap::new(),
        }
    }

    /// Builds a dataset from aligned columns; all columns must share `len`.
    pub fn from_columns<I, S>(start: Quarter, columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut series = BTreeMap::new();
        let mut len = None;
        for (name, values) in columns {
            let name = name.into();
            match len {
                None => len = Some(values.len()),
                Some(l) if l != values.len() => {
                    return Err(Error::InvalidArgument(format!(
                        "series `{name}` has length {} but expected {l}",
                        values.len()
                    )))
                }
                _ => {}
            }
            series.insert(name, values);
        }
        Ok(Self {
            start,
            len: len.unwrap_or(0),
            series,
        })
    }

    pub fn start(&self) -> Quarter {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn end(&self) -> Quarter {
        self.start + (self.len as i64 - 1)
    }

    pub fn quarter(&self, i: usize) -> Quarter {
        self.start + i as i64
    }

    pub fn index_of(&self, q: Quarter) -> Option<usize> {
        let i = q.since(self.start);
        (i >= 0 && (i as usize) < self.len).then_some(i as usize)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.series.contains_key(name)
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.series
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn series(&self, name: &str) -> Result<Series> {
        Ok(Series::new(self.start, self.values(name)?.to_vec()))
    }

    /// Adds (or replaces) a series, re-indexed onto this dataset's range.
    pub fn insert(&mut self, name: impl Into<String>, series: &Series) {
        self.series
            .insert(name.into(), series.aligned(self.start, self.len));
    }

    pub fn with_series(mut self, name: impl Into<String>, series: &Series) -> Self {
        self.insert(name, series);
        self
    }
}

/// Loads a delimiter-separated file with a quarter column and numeric columns.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    load_dataset_from_reader(file, schema)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

pub fn load_dataset_from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let qcol = headers
        .iter()
        .position(|h| h == schema.quarter_column)
        .ok_or_else(|| Error::Ingestion {
            row: 1,
            message: format!("missing quarter column `{}`", schema.quarter_column),
        })?;

    let selected: Vec<(usize, String)> = if schema.columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != qcol)
            .map(|(i, h)| (i, h.to_string()))
            .collect()
    } else {
        schema
            .columns
            .iter()
            .map(|(file_col, name)| {
                headers
                    .iter()
                    .position(|h| h == file_col)
                    .map(|i| (i, name.clone()))
                    .ok_or_else(|| Error::Ingestion {
                        row: 1,
                        message: format!("missing column `{file_col}`"),
                    })
            })
            .collect::<Result<_>>()?
    };

    // (quarter, file line, values)
    let mut rows: Vec<(Quarter, usize, Vec<f64>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let cell = record.get(qcol).unwrap_or("");
        let q: Quarter = cell.parse().map_err(|_| Error::Ingestion {
            row: line,
            message: format!("malformed quarter `{cell}`"),
        })?;
        let values = selected
            .iter()
            .map(|(c, name)| {
                let raw = record.get(*c).unwrap_or("");
                if is_missing(raw) {
                    Ok(f64::NAN)
                } else {
                    raw.trim().parse::<f64>().map_err(|_| Error::Ingestion {
                        row: line,
                        message: format!("non-numeric value `{raw}` in `{name}`"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((q, line, values));
    }
    if rows.is_empty() {
        return Err(Error::Ingestion {
            row: 1,
            message: "no data rows".into(),
        });
    }
    rows.sort_by_key(|r| r.0);

    for w in rows.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        if cur.0 == prev.0 {
            return Err(Error::Ingestion {
                row: cur.1.max(prev.1),
                message: format!("duplicate quarter {}", cur.0),
            });
        }
        if cur.0.since(prev.0) != 1 {
            return Err(Error::Ingestion {
                row: cur.1,
                message: format!("gap between {} and {}", prev.0, cur.0),
            });
        }
    }

    let start = rows[0].0;
    let mut ds = Dataset::new(start, rows.len());
    for (j, (_, name)) in selected.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r.2[j]).collect();
        if let (Some(first), Some(last)) = (
            values.iter().position(|v| v.is_finite()),
            values.iter().rposition(|v| v.is_finite()),
        ) {
            if let Some(k) = (first..=last).find(|&k| !values[k].is_finite()) {
                return Err(Error::Ingestion {
                    row: rows[k].1,
                    message: format!("interior missing value in `{name}` at {}", rows[k].0),
                });
            }
        }
        ds.series.insert(name.clone(), values);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Dataset> {
        load_dataset_from_reader(text.as_bytes(), &Schema::default())
    }

    #[test]
    fn three_rows() {
        let ds = load("quarter,gdp\n1950Q1,1\n1950Q2,2\n1950Q3,3\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.values("gdp").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn interior_gap_is_an_error() {
        let err = load("quarter,gdp\n1950Q1,1\n1950Q3,3\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }), "{err}");
    }

    #[test]
    fn sample_start_1889() {
        let ds = load("quarter,g\n1889Q1,1\n1889Q2,2\n").unwrap();
        assert_eq!(ds.start().year(), 1889);
        assert_eq!(ds.start().quarter(), 1);
    }

    #[test]
    fn rows_are_sorted() {
        let ds = load("quarter,g\n1950Q2,2\n1950Q1,1\n").unwrap();
        assert_eq!(ds.values("g").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn duplicate_and_malformed_quarters() {
        assert!(matches!(
            load("quarter,g\n1950Q1,1\n1950Q1,2\n").unwrap_err(),
            Error::Ingestion { .. }
        ));
        let err = load("quarter,g\n1950Q1,1\n1950X2,2\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }));
    }

    #[test]
    fn ragged_edges_allowed_interior_missing_rejected() {
        let ds = load("quarter,a,b\n1950Q1,,1\n1950Q2,2,2\n1950Q3,3,\n").unwrap();
        assert!(ds.values("a").unwrap()[0].is_nan());
        assert!(ds.values("b").unwrap()[2].is_nan());
        let err = load("quarter,a\n1950Q1,1\n1950Q2,NA\n1950Q3,3\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }));
    }

    #[test]
    fn schema_renames_columns() {
        let mut schema = Schema::default();
        schema.quarter_column = "date".into();
        schema.columns.insert("RGDP".into(), "output".into());
        let ds = load_dataset_from_reader("date,RGDP,other\n2000Q1,5,6\n".as_bytes(), &schema)
            .unwrap();
        assert_eq!(ds.names().collect::<Vec<_>>(), vec!["output"]);
    }

    #[test]
    fn series_file_round_trip() {
        let s = Series::new("1917Q1".parse().unwrap(), vec![0.1, -2.5, 1.0 / 3.0]);
        let mut buf = Vec::new();
        s.write_csv("shock", &mut buf).unwrap();
        let (name, back) = Series::read_csv(buf.as_slice()).unwrap();
        assert_eq!(name, "shock");
        assert_eq!(back, s);
    }

    #[test]
    fn insert_aligns_on_quarters() {
        let mut ds = Dataset::from_columns("2000Q1".parse().unwrap(), [("a", vec![1.0; 4])]).unwrap();
        ds.insert("b", &Series::new("2000Q3".parse().unwrap(), vec![7.0, 8.0, 9.0]));
        let b = ds.values("b").unwrap();
        assert!(b[0].is_nan() && b[1].is_nan());
        assert_eq!(&b[2..], &[7.0, 8.0]);
    }
}
