//! Preprocessing of scan sets and assembly of the reservoir matrix.
//!
//! Stages run in a fixed order: background removal, smoothing, x-range cut,
//! decimation, row stacking, normalization, transpose. Every stage is a pure
//! function so [`assemble`] is deterministic in its inputs.

mod savgol;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ColumnSpec, ScanRecord, ScanSet};

pub use savgol::savgol_smooth;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("background removal requested but no background record is loaded")]
    MissingBackground,
    #[error("smoothing window {0} must be odd")]
    EvenWindow(usize),
    #[error("smoothing window {win} too large for {len} samples")]
    WindowTooLarge { win: usize, len: usize },
    #[error("smoothing rank {rank} must be below the window length {win}")]
    RankTooHigh { rank: usize, win: usize },
    #[error("fewer than 2 samples remain in [{x1}, {x2}]")]
    EmptySlice { x1: f64, x2: f64 },
    #[error("invalid parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("reservoir matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("scan set has no records")]
    EmptySet,
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

fn default_delimiter() -> String {
    "\t".to_string()
}

fn default_smooth_win() -> usize {
    5
}

fn default_smooth_rank() -> usize {
    2
}

fn default_sample_rate() -> usize {
    1
}

/// Data-format and preprocessing options, keyed as in the configuration file.
///
/// All optional stages default to off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessParams {
    #[serde(rename = "Xs")]
    pub xs: String,
    #[serde(rename = "Readouts")]
    pub readouts: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub remove_bg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_fname: Option<String>,
    #[serde(default)]
    pub smooth: bool,
    #[serde(default = "default_smooth_win")]
    pub smooth_win: usize,
    #[serde(default = "default_smooth_rank")]
    pub smooth_rank: usize,
    #[serde(default)]
    pub cut_xs: bool,
    #[serde(default)]
    pub x1: f64,
    #[serde(default)]
    pub x2: f64,
    #[serde(default)]
    pub normalize_local: bool,
    #[serde(default)]
    pub normalize_global: bool,
    #[serde(default)]
    pub sample: bool,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: usize,
    #[serde(default)]
    pub transpose: bool,
}

impl ProcessParams {
    /// Parameters with every optional stage disabled.
    pub fn new(xs: &str, readouts: &str, delimiter: &str) -> Self {
        Self {
            xs: xs.to_string(),
            readouts: readouts.to_string(),
            delimiter: delimiter.to_string(),
            remove_bg: false,
            bg_fname: None,
            smooth: false,
            smooth_win: default_smooth_win(),
            smooth_rank: default_smooth_rank(),
            cut_xs: false,
            x1: 0.0,
            x2: 0.0,
            normalize_local: false,
            normalize_global: false,
            sample: false,
            sample_rate: default_sample_rate(),
            transpose: false,
        }
    }

    pub fn columns(&self) -> ColumnSpec {
        ColumnSpec::new(&self.xs, &self.readouts, &self.delimiter)
    }

    /// Checks the invariants that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: &str| {
            Err(PreprocessError::InvalidParams {
                field,
                reason: reason.to_string(),
            })
        };
        if self.delimiter.is_empty() {
            return invalid("delimiter", "must not be empty");
        }
        if self.remove_bg && self.bg_fname.is_none() {
            return invalid("bg_fname", "required when remove_bg is set");
        }
        if self.smooth {
            if self.smooth_win % 2 == 0 {
                return invalid("smooth_win", "must be odd");
            }
            if self.smooth_rank >= self.smooth_win {
                return invalid("smooth_rank", "must be less than smooth_win");
            }
        }
        if self.cut_xs && !(self.x1 < self.x2) {
            return invalid("x1", "must be less than x2");
        }
        if self.sample && self.sample_rate == 0 {
            return invalid("sample_rate", "must be at least 1");
        }
        if self.normalize_local && self.normalize_global {
            return invalid(
                "normalize_global",
                "normalize_local and normalize_global are mutually exclusive",
            );
        }
        if self.transpose
            && (self.remove_bg
                || self.smooth
                || self.cut_xs
                || self.normalize_local
                || self.normalize_global
                || self.sample)
        {
            return invalid(
                "transpose",
                "cannot be combined with other preprocessing options",
            );
        }
        Ok(())
    }
}

/// Dense reservoir matrix: one row per input step, one column per readout node.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMatrix {
    pub values: DMatrix<f64>,
    /// Scan index of each row, or node index when transposed.
    pub row_labels: Vec<u64>,
    /// `r0`, `r1`, ... one per column.
    pub node_labels: Vec<String>,
    pub applied: ProcessParams,
}

impl ReservoirMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.ncols()
    }
}

pub fn remove_background(set: &ScanSet) -> Result<ScanSet> {
    let bg = set
        .background
        .as_ref()
        .ok_or(PreprocessError::MissingBackground)?;
    let records = set
        .records
        .iter()
        .map(|r| ScanRecord {
            scan_index: r.scan_index,
            xs: r.xs.clone(),
            readouts: r
                .readouts
                .iter()
                .zip(&bg.readouts)
                .map(|(v, b)| v - b)
                .collect(),
        })
        .collect();
    Ok(ScanSet {
        records,
        ..set.clone()
    })
}

/// Keeps samples with `x1 <= x <= x2`.
pub fn cut_xs(record: &ScanRecord, x1: f64, x2: f64) -> Result<ScanRecord> {
    if !(x1 < x2) {
        return Err(PreprocessError::InvalidParams {
            field: "x1",
            reason: "must be less than x2".into(),
        });
    }
    let (xs, readouts): (Vec<f64>, Vec<f64>) = record
        .xs
        .iter()
        .zip(&record.readouts)
        .filter(|(x, _)| **x >= x1 && **x <= x2)
        .map(|(x, y)| (*x, *y))
        .unzip();
    if xs.len() < 2 {
        return Err(PreprocessError::EmptySlice { x1, x2 });
    }
    Ok(ScanRecord {
        scan_index: record.scan_index,
        xs,
        readouts,
    })
}

/// Keeps samples at indices `0, rate, 2 * rate, ...`.
pub fn sample(record: &ScanRecord, rate: usize) -> Result<ScanRecord> {
    if rate == 0 {
        return Err(PreprocessError::InvalidParams {
            field: "sample_rate",
            reason: "must be at least 1".into(),
        });
    }
    Ok(ScanRecord {
        scan_index: record.scan_index,
        xs: record.xs.iter().copied().step_by(rate).collect(),
        readouts: record.readouts.iter().copied().step_by(rate).collect(),
    })
}

fn rescale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Maps each column onto [0, 1]; constant columns become zeros.
pub fn normalize_local(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let lo = col.min();
        let hi = col.max();
        col.apply(|v| *v = rescale(*v, lo, hi));
    }
    out
}

/// Maps the whole matrix onto [0, 1] with one affine map; a constant matrix
/// becomes zeros.
pub fn normalize_global(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let lo = m.min();
    let hi = m.max();
    m.map(|v| rescale(v, lo, hi))
}

fn smooth_record(record: &ScanRecord, win: usize, rank: usize) -> Result<ScanRecord> {
    if win >= record.len() {
        return Err(PreprocessError::WindowTooLarge {
            win,
            len: record.len(),
        });
    }
    Ok(ScanRecord {
        scan_index: record.scan_index,
        xs: record.xs.clone(),
        readouts: savgol_smooth(&record.readouts, win, rank)?,
    })
}

/// Runs the enabled stages over `set` and stacks the result into a matrix.
pub fn assemble(set: &ScanSet, p: &ProcessParams) -> Result<ReservoirMatrix> {
    p.validate()?;
    if set.records.is_empty() {
        return Err(PreprocessError::EmptySet);
    }
    let mut stage = if p.remove_bg {
        remove_background(set)?.records
    } else {
        set.records.clone()
    };
    if p.smooth {
        stage = stage
            .iter()
            .map(|r| smooth_record(r, p.smooth_win, p.smooth_rank))
            .collect::<Result<_>>()?;
    }
    if p.cut_xs {
        stage = stage
            .iter()
            .map(|r| cut_xs(r, p.x1, p.x2))
            .collect::<Result<_>>()?;
    }
    if p.sample {
        stage = stage
            .iter()
            .map(|r| sample(r, p.sample_rate))
            .collect::<Result<_>>()?;
    }

    let n_cols = stage[0].len();
    let mut values = DMatrix::from_fn(stage.len(), n_cols, |i, j| stage[i].readouts[j]);
    let mut row_labels: Vec<u64> = stage.iter().map(|r| r.scan_index).collect();

    if p.normalize_local {
        values = normalize_local(&values);
    } else if p.normalize_global {
        values = normalize_global(&values);
    }
    if p.transpose {
        values = values.transpose();
        row_labels = (0..values.nrows() as u64).collect();
    }
    if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let rows = values.nrows();
        return Err(PreprocessError::NonFinite {
            row: idx % rows,
            col: idx / rows,
        });
    }
    let node_labels = (0..values.ncols()).map(|j| format!("r{j}")).collect();
    Ok(ReservoirMatrix {
        values,
        row_labels,
        node_labels,
        applied: p.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn record(index: u64, xs: &[f64], ys: &[f64]) -> ScanRecord {
        ScanRecord {
            scan_index: index,
            xs: xs.to_vec(),
            readouts: ys.to_vec(),
        }
    }

    fn scan_set(rows: &[Vec<f64>], bg: Option<Vec<f64>>) -> ScanSet {
        let xs: Vec<f64> = (0..rows[0].len()).map(|i| i as f64).collect();
        ScanSet {
            records: rows
                .iter()
                .enumerate()
                .map(|(i, r)| record(i as u64 + 1, &xs, r))
                .collect(),
            background: bg.map(|b| record(0, &xs, &b)),
            source_dir: PathBuf::from("."),
            prefix: "scan".into(),
        }
    }

    fn params() -> ProcessParams {
        ProcessParams::new("t", "Voltage", "\t")
    }

    #[test]
    fn background_subtraction() {
        let set = scan_set(&[vec![3.0, 4.0]], Some(vec![1.0, 1.0]));
        let out = remove_background(&set).unwrap();
        assert_eq!(out.records[0].readouts, vec![2.0, 3.0]);

        let set = scan_set(&[vec![3.0, 4.0]], Some(vec![3.0, 4.0]));
        assert_eq!(
            remove_background(&set).unwrap().records[0].readouts,
            vec![0.0, 0.0]
        );

        let set = scan_set(&[vec![3.0, 4.0]], None);
        assert_eq!(
            remove_background(&set),
            Err(PreprocessError::MissingBackground)
        );
    }

    #[test]
    fn background_matches_elementwise_loop() {
        let raw = vec![
            vec![1.5, -2.0, 3.25, 0.0],
            vec![9.0, 8.0, 7.0, 6.0],
            vec![-1.0, 0.5, 0.25, 0.125],
        ];
        let bg = vec![0.5, 0.5, -1.0, 2.0];
        let out = remove_background(&scan_set(&raw, Some(bg.clone()))).unwrap();
        for i in 0..raw.len() {
            for j in 0..bg.len() {
                assert_eq!(out.records[i].readouts[j], raw[i][j] - bg[j]);
            }
        }
    }

    #[test]
    fn cut_is_inclusive() {
        let r = record(1, &[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]);
        let c = cut_xs(&r, 2.0, 3.0).unwrap();
        assert_eq!(c.xs, vec![2.0, 3.0]);
        assert_eq!(c.readouts, vec![20.0, 30.0]);
        assert_eq!(cut_xs(&r, 1.0, 4.0).unwrap(), r);
        assert!(matches!(
            cut_xs(&r, 10.0, 11.0),
            Err(PreprocessError::EmptySlice { .. })
        ));
    }

    #[test]
    fn decimation() {
        let xs: Vec<f64> = (0..40).map(f64::from).collect();
        let r = record(1, &xs, &xs);
        assert_eq!(sample(&r, 13).unwrap().xs, vec![0.0, 13.0, 26.0, 39.0]);
        assert_eq!(sample(&r, 1).unwrap(), r);
        assert_eq!(sample(&r, 40).unwrap().xs, vec![0.0]);
        assert_eq!(sample(&r, 100).unwrap().xs, vec![0.0]);
    }

    #[test]
    fn local_normalization() {
        let m = DMatrix::from_column_slice(3, 2, &[2.0, 4.0, 6.0, 5.0, 5.0, 5.0]);
        let n = normalize_local(&m);
        assert_eq!(n.column(0).as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(n.column(1).as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn global_normalization() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 6.0, 10.0]);
        let n = normalize_global(&m);
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[0.0, 0.25, 0.5, 1.0]));
        let c = DMatrix::from_element(2, 3, 7.0);
        assert_eq!(normalize_global(&c), DMatrix::zeros(2, 3));
    }

    #[test]
    fn normalization_matches_direct_loops() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-10.0..10.0));
        let local = normalize_local(&m);
        let global = normalize_global(&m);
        let (mut glo, mut ghi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..4 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..5 {
                lo = lo.min(m[(i, j)]);
                hi = hi.max(m[(i, j)]);
            }
            glo = glo.min(lo);
            ghi = ghi.max(hi);
            for i in 0..5 {
                assert!((local[(i, j)] - (m[(i, j)] - lo) / (hi - lo)).abs() < 1e-15);
            }
        }
        for (g, v) in global.iter().zip(m.iter()) {
            assert!((g - (v - glo) / (ghi - glo)).abs() < 1e-15);
        }
        assert_eq!(global.min(), 0.0);
        assert_eq!(global.max(), 1.0);
    }

    #[test]
    fn plain_assembly_stacks_rows() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let m = assemble(&scan_set(&rows, None), &params()).unwrap();
        assert_eq!(m.values, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(m.row_labels, vec![1, 2]);
        assert_eq!(m.node_labels, vec!["r0", "r1", "r2"]);
    }

    #[test]
    fn transpose_layout() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..5).map(|j| (10 * i + j) as f64).collect())
            .collect();
        let mut p = params();
        p.transpose = true;
        let m = assemble(&scan_set(&rows, None), &p).unwrap();
        assert_eq!(m.n_rows(), 5);
        assert_eq!(m.n_nodes(), 3);
        for i in 0..3 {
            for j in 0..5 {
                assert_eq!(m.values[(j, i)], rows[i][j]);
            }
        }
    }

    #[test]
    fn validation_rejects_illegal_combinations() {
        let mut p = params();
        p.transpose = true;
        p.sample = true;
        assert!(matches!(
            p.validate(),
            Err(PreprocessError::InvalidParams { field: "transpose", .. })
        ));
        let mut p = params();
        p.normalize_local = true;
        p.normalize_global = true;
        assert!(p.validate().is_err());
        let mut p = params();
        p.smooth = true;
        p.smooth_win = 6;
        assert!(p.validate().is_err());
        let mut p = params();
        p.cut_xs = true;
        p.x1 = 3.0;
        p.x2 = 3.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.remove_bg = true;
        assert!(p.validate().is_err());
    }

    #[test]
    fn smoothing_window_must_be_below_sample_count() {
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]];
        let mut p = params();
        p.smooth = true;
        p.smooth_win = 5;
        p.smooth_rank = 2;
        assert!(matches!(
            assemble(&scan_set(&rows, None), &p),
            Err(PreprocessError::WindowTooLarge { .. })
        ));
        p.smooth_win = 3;
        assert!(assemble(&scan_set(&rows, None), &p).is_ok());
    }

    #[test]
    fn full_stage_order() {
        // bg -> cut -> sample -> normalize
        let rows = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        ];
        let mut p = params();
        p.remove_bg = true;
        p.bg_fname = Some("bg.txt".into());
        p.cut_xs = true;
        p.x1 = 1.0;
        p.x2 = 5.0;
        p.sample = true;
        p.sample_rate = 2;
        p.normalize_global = true;
        let set = scan_set(&rows, Some(vec![1.0; 6]));
        let m = assemble(&set, &p).unwrap();
        // after bg: [0..5], [1,3,5,7,9,11]; cut x in [1,5]: cols 1..=5; sample: cols 1,3,5
        // -> [1,3,5], [3,7,11]; global normalize over [1, 11]
        let expect = DMatrix::from_row_slice(2, 3, &[0.0, 0.2, 0.4, 0.2, 0.6, 1.0]);
        assert!((m.values - expect).abs().max() < 1e-15);
        assert_eq!(m.applied, p);
    }

    #[test]
    fn params_use_table_keys() {
        let p: ProcessParams = serde_json::from_str(
            r#"{"Xs":"Frequency","Readouts":"Spectra","delimiter":",","remove_bg":true,
                "bg_fname":"BG.txt","sample":true,"sample_rate":13}"#,
        )
        .unwrap();
        assert_eq!(p.xs, "Frequency");
        assert_eq!(p.sample_rate, 13);
        assert!(p.remove_bg && !p.transpose);
        assert!(serde_json::from_str::<ProcessParams>(r#"{"Xs":"a","Readouts":"b","smoth":true}"#).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(vals in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let m = DMatrix::from_vec(4, 3, vals);
            let l1 = normalize_local(&m);
            let l2 = normalize_local(&l1);
            prop_assert!((l1 - l2).abs().max() <= 1e-12);
            let g1 = normalize_global(&m);
            let g2 = normalize_global(&g1);
            prop_assert!((g1 - g2).abs().max() <= 1e-12);
        }

        #[test]
        fn savgol_polynomial_fixed_point(
            half in 1usize..6,
            rank_extra in 0usize..3,
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..4),
            n_extra in 0usize..20,
        ) {
            let win = 2 * half + 1;
            let degree = coeffs.len() - 1;
            let rank = (degree + rank_extra).min(win - 1);
            prop_assume!(rank >= degree);
            let n = win + n_extra;
            let seq: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
                })
                .collect();
            let out = savgol_smooth(&seq, win, rank).unwrap();
            for (a, b) in seq.iter().zip(&out) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn cut_and_sample_commute_with_stacking(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 12), 1..5),
            rate in 1usize..5,
            lo in 0usize..5,
            span in 2usize..7,
        ) {
            let set = scan_set(&rows, None);
            let x1 = lo as f64;
            let x2 = (lo + span) as f64;
            let mut p = params();
            p.cut_xs = true;
            p.x1 = x1;
            p.x2 = x2;
            p.sample = true;
            p.sample_rate = rate;
            let m = assemble(&set, &p).unwrap();
            let full = assemble(&set, &params()).unwrap();
            let cols: Vec<usize> = (lo..=(lo + span).min(11)).step_by(rate).collect();
            prop_assert_eq!(m.n_nodes(), cols.len());
            for i in 0..rows.len() {
                for (k, &c) in cols.iter().enumerate() {
                    prop_assert_eq!(m.values[(i, k)], full.values[(i, c)]);
                }
            }
        }
    }
}
