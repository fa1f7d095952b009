//! CSV with a header row, one label column and optional categorical
//! columns expanded one-hot.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Example, IngestError, LabelCodec};
use crate::metric::FeatureVector;

/// Label column, by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Index(0)
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(s.parse::<usize>()
            .map(LabelColumn::Index)
            .unwrap_or_else(|_| LabelColumn::Name(s.to_owned())))
    }
}

/// Column roles plus the category dictionary of every categorical column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default)]
    pub label: LabelColumn,
    /// Column name to its categories, in feature order.
    #[serde(default)]
    pub categorical: BTreeMap<String, Vec<String>>,
}

impl CsvSchema {
    pub fn from_json_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| IngestError::Schema(format!("{}: {e}", path.display())))
    }

    /// Builds the dictionaries of `columns` with one pass over the file;
    /// categories are kept in order of first appearance.
    pub fn prepass(
        path: &Path,
        label: LabelColumn,
        columns: &[String],
    ) -> Result<Self, IngestError> {
        let mut rdr = open_reader(path)?;
        let headers = read_headers(&mut rdr, path)?;
        let mut dicts: Vec<(usize, Vec<String>)> = Vec::new();
        for c in columns {
            dicts.push((column_position(&headers, c)?, Vec::new()));
        }
        let mut rec = csv::StringRecord::new();
        loop {
            match rdr.read_record(&mut rec) {
                Ok(false) => break,
                Ok(true) => {
                    for (pos, cats) in dicts.iter_mut() {
                        if let Some(v) = rec.get(*pos) {
                            if !cats.iter().any(|c| c == v) {
                                cats.push(v.to_owned());
                            }
                        }
                    }
                }
                // malformed rows surface during the real read
                Err(e) if e.is_io_error() => return Err(csv_io(path, e)),
                Err(_) => {}
            }
        }
        Ok(CsvSchema {
            label,
            categorical: columns
                .iter()
                .cloned()
                .zip(dicts.into_iter().map(|(_, d)| d))
                .collect(),
        })
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn read_headers(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>, IngestError> {
    let h = rdr.headers().map_err(|e| csv_io(path, e))?;
    Ok(h.iter().map(|s| s.trim().to_owned()).collect())
}

fn csv_io(path: &Path, e: csv::Error) -> IngestError {
    IngestError::io(path, std::io::Error::other(e.to_string()))
}

fn column_position(headers: &[String], name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::Schema(format!("no column named `{name}`")))
}

enum ColumnRole {
    Label,
    Numeric {
        offset: usize,
    },
    Categorical {
        offset: usize,
        categories: Vec<String>,
    },
}

/// Streaming CSV reader; one record is held at a time.
pub struct CsvSource {
    path: PathBuf,
    rdr: csv::Reader<File>,
    roles: Vec<ColumnRole>,
    dim: usize,
    record: csv::StringRecord,
    codec: LabelCodec,
}

impl CsvSource {
    pub fn open(path: &Path, schema: &CsvSchema) -> Result<Self, IngestError> {
        let mut rdr = open_reader(path)?;
        let headers = read_headers(&mut rdr, path)?;
        let label_pos = match &schema.label {
            LabelColumn::Index(i) if *i < headers.len() => *i,
            LabelColumn::Index(i) => {
                return Err(IngestError::Schema(format!(
                    "label column {i} out of range ({} columns)",
                    headers.len()
                )))
            }
            LabelColumn::Name(n) => column_position(&headers, n)?,
        };
        for name in schema.categorical.keys() {
            column_position(&headers, name)?;
        }
        let mut roles = Vec::with_capacity(headers.len());
        let mut dim = 0;
        for (pos, h) in headers.iter().enumerate() {
            if pos == label_pos {
                roles.push(ColumnRole::Label);
            } else if let Some(cats) = schema.categorical.get(h) {
                roles.push(ColumnRole::Categorical {
                    offset: dim,
                    categories: cats.clone(),
                });
                dim += cats.len();
            } else {
                roles.push(ColumnRole::Numeric { offset: dim });
                dim += 1;
            }
        }
        if dim == 0 {
            return Err(IngestError::Schema("no feature columns".into()));
        }
        Ok(CsvSource {
            path: path.to_owned(),
            rdr,
            roles,
            dim,
            record: csv::StringRecord::new(),
            codec: LabelCodec::new(),
        })
    }

    /// Feature dimension after one-hot expansion.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codec(&self) -> &LabelCodec {
        &self.codec
    }

    fn decode(&mut self) -> Result<Example, String> {
        let mut x = vec![0.0; self.dim];
        let mut label = None;
        for (field, role) in self.record.iter().zip(&self.roles) {
            let field = field.trim();
            match role {
                ColumnRole::Label => label = Some(field),
                ColumnRole::Numeric { offset } => {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| format!("not a number: `{field}`"))?;
                    if !v.is_finite() {
                        return Err(format!("non-finite value `{field}`"));
                    }
                    x[*offset] = v;
                }
                ColumnRole::Categorical { offset, categories } => {
                    let k = categories
                        .iter()
                        .position(|c| c == field)
                        .ok_or_else(|| format!("unknown category `{field}`"))?;
                    x[offset + k] = 1.0;
                }
            }
        }
        let token = label.ok_or("missing label")?;
        let y = self.codec.encode(token);
        Ok((FeatureVector::dense(x).map_err(|e| e.to_string())?, y))
    }
}

impl Iterator for CsvSource {
    type Item = Result<Example, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rdr.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                Some(self.decode().map_err(|m| IngestError::record(line, m)))
            }
            Err(e) if e.is_io_error() => Some(Err(csv_io(&self.path, e))),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Some(Err(IngestError::record(line, e)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::Label;

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn one_hot_expansion() {
        let (_d, p) = write("y,x,color\na,1.0,red\nb,2.5,blue\n");
        let mut schema = CsvSchema::default();
        schema
            .categorical
            .insert("color".into(), vec!["red".into(), "blue".into()]);
        let src = CsvSource::open(&p, &schema).unwrap();
        assert_eq!(src.dim(), 3);
        let rows: Vec<_> = src.map(|r| r.unwrap()).collect();
        assert_eq!(rows[0].0.to_dense(), vec![1.0, 1.0, 0.0]);
        assert_eq!(rows[0].1, Label(0));
        assert_eq!(rows[1].0.to_dense(), vec![2.5, 0.0, 1.0]);
        assert_eq!(rows[1].1, Label(1));
    }

    #[test]
    fn prepass_builds_dictionaries_in_arrival_order() {
        let (_d, p) = write("f,c,label\n1,z,0\n2,a,1\n3,z,0\n");
        let schema = CsvSchema::prepass(&p, "label".parse().unwrap(), &["c".to_owned()]).unwrap();
        assert_eq!(schema.categorical["c"], vec!["z", "a"]);
        let src = CsvSource::open(&p, &schema).unwrap();
        let rows: Vec<_> = src.map(|r| r.unwrap().0.to_dense()).collect();
        assert_eq!(
            rows,
            vec![
                vec![1.0, 1.0, 0.0],
                vec![2.0, 0.0, 1.0],
                vec![3.0, 1.0, 0.0]
            ]
        );
    }

    #[test]
    fn three_lines_three_examples_in_order() {
        let (_d, p) = write("label,a,b\nx,1,2\ny,3,4\nx,5,6\n");
        let rows: Vec<_> = CsvSource::open(&p, &CsvSchema::default())
            .unwrap()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].0.to_dense(), vec![5.0, 6.0]);
        assert_eq!(
            rows.iter().map(|r| r.1 .0).collect::<Vec<_>>(),
            vec![0, 1, 0]
        );
    }

    #[test]
    fn bad_rows_are_record_errors() {
        let (_d, p) = write("label,a\nx,1\ny,oops\nz,1,2\nw,4\n");
        let got: Vec<_> = CsvSource::open(&p, &CsvSchema::default())
            .unwrap()
            .collect();
        assert_eq!(got.len(), 4);
        assert!(got[0].is_ok() && got[3].is_ok());
        assert!(got[1].as_ref().unwrap_err().is_record());
        assert!(got[2].as_ref().unwrap_err().is_record());
    }

    #[test]
    fn schema_errors() {
        let (_d, p) = write("label,a\nx,1\n");
        let s = CsvSchema {
            label: LabelColumn::Name("nope".into()),
            ..Default::default()
        };
        assert!(matches!(
            CsvSource::open(&p, &s),
            Err(IngestError::Schema(_))
        ));
        let s: CsvSchema = serde_json::from_str(r#"{"label": 5}"#).unwrap();
        assert!(matches!(
            CsvSource::open(&p, &s),
            Err(IngestError::Schema(_))
        ));
        let s: CsvSchema =
            serde_json::from_str(r#"{"label": "a", "categorical": {"label": ["x"]}}"#).unwrap();
        let rows: Vec<_> = CsvSource::open(&p, &s)
            .unwrap()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(rows[0].0.to_dense(), vec![1.0]);
    }
}
