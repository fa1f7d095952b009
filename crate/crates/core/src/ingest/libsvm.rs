//! Sparse LIBSVM text: `<label> <index>:<value> ...` with 1-based,
//! strictly increasing indices.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{Example, IngestError, LabelCodec};
use crate::metric::FeatureVector;

/// Parses one record into its label token and a sparse vector of dimension
/// `dim`. Indices in the returned vector are zero-based.
pub fn parse_libsvm_line(line: &str, dim: usize) -> Result<(String, FeatureVector), String> {
    let mut tokens = line.split_whitespace();
    let label = tokens.next().ok_or("empty record")?;
    if label.contains(':') {
        return Err(format!("missing label before `{label}`"));
    }
    let mut pairs = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| format!("malformed feature `{tok}`"))?;
        let i: usize = i.parse().map_err(|_| format!("bad index in `{tok}`"))?;
        let v: f64 = v.parse().map_err(|_| format!("bad value in `{tok}`"))?;
        if i == 0 {
            return Err("indices start at 1".into());
        }
        if i <= last {
            return Err(format!("index {i} does not increase after {last}"));
        }
        if i > dim {
            return Err(format!("index {i} exceeds dimension {dim}"));
        }
        if !v.is_finite() {
            return Err(format!("non-finite value in `{tok}`"));
        }
        last = i;
        pairs.push((i - 1, v));
    }
    let x = FeatureVector::sparse(dim, pairs).map_err(|e| e.to_string())?;
    Ok((label.to_owned(), x))
}

/// Writes `x` as one LIBSVM record, skipping zero coordinates.
pub fn write_libsvm_line<W: Write>(
    mut w: W,
    label: &str,
    x: &FeatureVector,
) -> std::io::Result<()> {
    w.write_all(label.as_bytes())?;
    for (i, v) in x.iter_nonzero() {
        write!(w, " {}:{}", i + 1, v)?;
    }
    w.write_all(b"\n")
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with('#')
}

/// Result of a pre-pass over a LIBSVM file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LibsvmScan {
    pub records: u64,
    pub max_index: usize,
}

/// Counts records and finds the largest feature index without keeping the
/// file in memory. Malformed tokens are ignored here and reported by the
/// actual read.
pub fn scan_libsvm(path: &Path) -> Result<LibsvmScan, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut scan = LibsvmScan {
        records: 0,
        max_index: 0,
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if is_skippable(&line) {
            continue;
        }
        scan.records += 1;
        for tok in line.split_whitespace().skip(1) {
            if let Some(i) = tok
                .split_once(':')
                .and_then(|(i, _)| i.parse::<usize>().ok())
            {
                scan.max_index = scan.max_index.max(i);
            }
        }
    }
    Ok(scan)
}

/// Streaming reader; holds one line at a time.
pub struct LibsvmSource<R> {
    path: PathBuf,
    reader: R,
    dim: usize,
    line_no: u64,
    buf: String,
    codec: LabelCodec,
}

impl LibsvmSource<BufReader<File>> {
    /// Opens `path` for vectors of dimension `dim` (see [`scan_libsvm`]).
    pub fn open(path: &Path, dim: usize) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        Ok(Self::from_reader(BufReader::new(file), dim, path))
    }
}

impl<R: BufRead> LibsvmSource<R> {
    pub fn from_reader(reader: R, dim: usize, name: impl Into<PathBuf>) -> Self {
        LibsvmSource {
            path: name.into(),
            reader,
            dim: dim.max(1),
            line_no: 0,
            buf: String::new(),
            codec: LabelCodec::new(),
        }
    }

    pub fn codec(&self) -> &LabelCodec {
        &self.codec
    }
}

impl<R: BufRead> Iterator for LibsvmSource<R> {
    type Item = Result<Example, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(IngestError::io(&self.path, e))),
            }
            self.line_no += 1;
            if is_skippable(&self.buf) {
                continue;
            }
            return Some(match parse_libsvm_line(&self.buf, self.dim) {
                Ok((token, x)) => Ok((x, self.codec.encode(&token))),
                Err(msg) => Err(IngestError::record(self.line_no, msg)),
            });
        }
    }
}
