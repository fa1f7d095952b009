//! Stream loading from LIBSVM and CSV files.

mod delimited;
mod libsvm;

pub use delimited::{CsvSchema, CsvSource, LabelColumn};
pub use libsvm::{parse_libsvm_line, scan_libsvm, write_libsvm_line, LibsvmScan, LibsvmSource};

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::ball::Label;
use crate::metric::{normalize_unit, FeatureVector, MetricError};

/// One labelled point of a stream.
pub type Example = (FeatureVector, Label);

#[derive(Debug, Error)]
pub enum IngestError {
    /// A single bad record; callers may skip it and go on.
    #[error("line {line}: {message}")]
    Record { line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Schema(String),
}

impl IngestError {
    pub fn is_record(&self) -> bool {
        matches!(self, IngestError::Record { .. })
    }

    pub(crate) fn record(line: u64, message: impl std::fmt::Display) -> Self {
        IngestError::Record {
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Maps opaque label tokens to dense ids in order of first arrival.
#[derive(Debug, Clone, Default)]
pub struct LabelCodec {
    ids: HashMap<String, Label>,
    tokens: Vec<String>,
}

impl LabelCodec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode(&mut self, token: &str) -> Label {
        if let Some(&y) = self.ids.get(token) {
            return y;
        }
        let y = Label(self.tokens.len() as u32);
        self.ids.insert(token.to_owned(), y);
        self.tokens.push(token.to_owned());
        y
    }

    pub fn decode(&self, y: Label) -> Option<&str> {
        self.tokens.get(y.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Rescales every point to unit norm. Zero vectors are dropped with a
/// warning and counted.
pub struct Normalized<I> {
    inner: I,
    dropped: u64,
}

impl<I> Normalized<I> {
    pub fn new(inner: I) -> Self {
        Normalized { inner, dropped: 0 }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl<I> Iterator for Normalized<I>
where
    I: Iterator<Item = Result<Example, IngestError>>,
{
    type Item = Result<Example, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.inner.next()? {
                Ok((x, y)) => match normalize_unit(&x) {
                    Ok(u) => return Some(Ok((u, y))),
                    Err(MetricError::ZeroVector) => {
                        self.dropped += 1;
                        log::warn!("skipping zero vector during normalization");
                    }
                    Err(e) => return Some(Err(IngestError::Schema(e.to_string()))),
                },
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codec_assigns_ids_in_arrival_order() {
        let mut c = LabelCodec::new();
        assert_eq!(c.encode("-1"), Label(0));
        assert_eq!(c.encode("+1"), Label(1));
        assert_eq!(c.encode("-1"), Label(0));
        assert_eq!(c.decode(Label(1)), Some("+1"));
        assert_eq!(c.decode(Label(2)), None);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn normalization_drops_zero_vectors() {
        let raw: Vec<Result<Example, IngestError>> = vec![
            Ok((FeatureVector::dense(vec![3.0, 4.0]).unwrap(), Label(0))),
            Ok((FeatureVector::dense(vec![0.0, 0.0]).unwrap(), Label(1))),
            Err(IngestError::record(3, "bad")),
            Ok((FeatureVector::dense(vec![0.0, 5.0]).unwrap(), Label(1))),
        ];
        let mut it = Normalized::new(raw.into_iter());
        let (a, _) = it.next().unwrap().unwrap();
        let a = a.to_dense();
        assert!((a[0] - 0.6).abs() < 1e-12 && (a[1] - 0.8).abs() < 1e-12);
        assert!(it.next().unwrap().unwrap_err().is_record());
        let (b, y) = it.next().unwrap().unwrap();
        assert_eq!((b.to_dense(), y), (vec![0.0, 1.0], Label(1)));
        assert!(it.next().is_none());
        assert_eq!(it.dropped(), 1);
    }
}
