//! Discovery and parsing of raw measurement files.
//!
//! A data directory holds one delimited text file per scan. Every file has a
//! header line naming its columns, followed by one row per sample. Files are
//! selected by a filename prefix and ordered by the integer that follows it,
//! so `scan10.txt` sorts after `scan9.txt`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

/// Maximum element-wise difference tolerated between the x-values of two
/// records that are supposed to share a grid.
pub const XS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no files starting with prefix {prefix:?} in {dir}")]
    EmptyDirectory { dir: PathBuf, prefix: String },
    #[error("files {first} and {second} both carry scan index {index}")]
    AmbiguousIndex {
        index: u64,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("file {path} matches prefix {prefix:?} but has no integer index")]
    NoIndex { path: PathBuf, prefix: String },
    #[error("{path}: column {column:?} not found in header")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: expected at least 2 samples, found {found}")]
    TooFewSamples { path: PathBuf, found: usize },
    #[error("{path}:{line}: x-values must be strictly increasing")]
    NonMonotonicXs { path: PathBuf, line: usize },
    #[error("{path}: x-values differ from those of {reference}")]
    XsMismatch { path: PathBuf, reference: PathBuf },
    #[error("background file {path} not found")]
    MissingBackground { path: PathBuf },
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// One parsed measurement file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub scan_index: u64,
    pub xs: Vec<f64>,
    pub readouts: Vec<f64>,
}

impl ScanRecord {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// All scans of one data directory, ordered by scan index, sharing one x grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSet {
    pub records: Vec<ScanRecord>,
    pub background: Option<ScanRecord>,
    pub source_dir: PathBuf,
    pub prefix: String,
}

impl ScanSet {
    /// The x grid shared by every record.
    pub fn xs(&self) -> &[f64] {
        &self.records[0].xs
    }
}

/// Column selection and delimiter for parsing scan files.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub xs_col: String,
    pub readout_col: String,
    pub delimiter: String,
}

impl ColumnSpec {
    pub fn new(xs_col: &str, readout_col: &str, delimiter: &str) -> Self {
        Self {
            xs_col: xs_col.to_string(),
            readout_col: readout_col.to_string(),
            delimiter: delimiter.to_string(),
        }
    }
}

/// Lists files in `dir` whose name starts with `prefix`, sorted numerically by
/// the first digit run after the prefix.
pub fn discover_files(dir: &Path, prefix: &str) -> Result<Vec<(PathBuf, u64)>> {
    discover_excluding(dir, prefix, None)
}

fn discover_excluding(
    dir: &Path,
    prefix: &str,
    exclude: Option<&str>,
) -> Result<Vec<(PathBuf, u64)>> {
    let io_err = |source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.starts_with(prefix) || exclude == Some(name) {
            continue;
        }
        let index = scan_index(&name[prefix.len()..]).ok_or_else(|| IngestError::NoIndex {
            path: path.clone(),
            prefix: prefix.to_string(),
        })?;
        found.push((path, index));
    }
    if found.is_empty() {
        return Err(IngestError::EmptyDirectory {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
        });
    }
    // Ties on the index are reported below; sort by path too so the report
    // does not depend on directory listing order.
    found.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    for pair in found.windows(2) {
        if pair[0].1 == pair[1].1 {
            return Err(IngestError::AmbiguousIndex {
                index: pair[0].1,
                first: pair[0].0.clone(),
                second: pair[1].0.clone(),
            });
        }
    }
    Ok(found)
}

/// First contiguous run of ASCII digits in `rest`.
fn scan_index(rest: &str) -> Option<u64> {
    let start = rest.find(|c: char| c.is_ascii_digit())?;
    let digits: &str = &rest[start..];
    let end = digits
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(digits.len());
    digits[..end].parse().ok()
}

/// Parses the two named columns of a delimited text file.
///
/// The first non-blank line is the header. Header names are matched exactly
/// after trimming surrounding whitespace. Blank lines are skipped; any other
/// row must have as many fields as the header. The scan index is taken from
/// the filename when it carries one, otherwise it is 0.
pub fn parse_scan_file(path: &Path, columns: &ColumnSpec) -> Result<ScanRecord> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let index = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(scan_index)
        .unwrap_or(0);
    parse_scan_text(path, &text, columns, index)
}

fn parse_scan_text(
    path: &Path,
    text: &str,
    columns: &ColumnSpec,
    scan_index: u64,
) -> Result<ScanRecord> {
    let malformed = |line: usize, reason: String| IngestError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let delim = columns.delimiter.as_str();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or_else(|| IngestError::MissingColumn {
        path: path.to_path_buf(),
        column: columns.xs_col.clone(),
    })?;
    let names: Vec<&str> = header.split(delim).map(str::trim).collect();
    let find = |col: &str| {
        names
            .iter()
            .position(|n| *n == col)
            .ok_or_else(|| IngestError::MissingColumn {
                path: path.to_path_buf(),
                column: col.to_string(),
            })
    };
    let xs_pos = find(&columns.xs_col)?;
    let readout_pos = find(&columns.readout_col)?;

    let mut xs = Vec::new();
    let mut readouts = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != names.len() {
            return Err(malformed(
                line_no,
                format!("expected {} fields, found {}", names.len(), fields.len()),
            ));
        }
        let parse = |pos: usize| {
            let cell = fields[pos].trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line_no, format!("invalid number {cell:?}")))
        };
        let x = parse(xs_pos)?;
        if let Some(&prev) = xs.last() {
            if x <= prev {
                return Err(IngestError::NonMonotonicXs {
                    path: path.to_path_buf(),
                    line: line_no,
                });
            }
        }
        xs.push(x);
        readouts.push(parse(readout_pos)?);
    }
    if xs.len() < 2 {
        return Err(IngestError::TooFewSamples {
            path: path.to_path_buf(),
            found: xs.len(),
        });
    }
    Ok(ScanRecord {
        scan_index,
        xs,
        readouts,
    })
}

/// Loads every scan in `dir` plus the optional background file.
///
/// The background file is never counted as a scan, even when its name starts
/// with `prefix`. Files are parsed in parallel; the result order depends only
/// on the scan indices.
pub fn load_scan_set(
    dir: &Path,
    prefix: &str,
    columns: &ColumnSpec,
    bg_fname: Option<&str>,
) -> Result<ScanSet> {
    let files = discover_excluding(dir, prefix, bg_fname)?;
    let records = files
        .par_iter()
        .map(|(path, index)| {
            let mut rec = parse_scan_file(path, columns)?;
            rec.scan_index = *index;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;

    let reference = &files[0].0;
    for ((path, _), rec) in files.iter().zip(&records).skip(1) {
        if !same_grid(&records[0].xs, &rec.xs) {
            return Err(IngestError::XsMismatch {
                path: path.clone(),
                reference: reference.clone(),
            });
        }
    }

    let background = match bg_fname {
        Some(name) => {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(IngestError::MissingBackground { path });
            }
            let bg = parse_scan_file(&path, columns)?;
            if !same_grid(&records[0].xs, &bg.xs) {
                return Err(IngestError::XsMismatch {
                    path,
                    reference: reference.clone(),
                });
            }
            Some(bg)
        }
        None => None,
    };

    Ok(ScanSet {
        records,
        background,
        source_dir: dir.to_path_buf(),
        prefix: prefix.to_string(),
    })
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= XS_TOLERANCE)
}

/// Writes a record in the format read by [`parse_scan_file`].
///
/// Values use the shortest decimal representation that parses back to the
/// same `f64`, so a write/parse cycle is lossless.
pub fn write_scan_record(path: &Path, record: &ScanRecord, columns: &ColumnSpec) -> Result<()> {
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let delim = &columns.delimiter;
    let mut out = String::with_capacity(record.len() * 24);
    out.push_str(&columns.xs_col);
    out.push_str(delim);
    out.push_str(&columns.readout_col);
    out.push('\n');
    for (x, y) in record.xs.iter().zip(&record.readouts) {
        out.push_str(&format!("{x}{delim}{y}\n"));
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}
