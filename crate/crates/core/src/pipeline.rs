//! End-to-end workflow: load scans, assemble the reservoir matrix, attach a
//! target and an input, train the readout and compute reservoir metrics.

use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

use crate::ingest::{load_scan_set, IngestError, ScanSet};
use crate::metrics::{
    linear_memory_capacity, nonlinearity, MemoryCapacityReport, MetricsError, MetricsInput,
    NonlinearityReport,
};
use crate::preprocess::{assemble, PreprocessError, ProcessParams, ReservoirMatrix};
use crate::targets::SignalSeries;
use crate::training::{train_and_evaluate, RcParams, RcResults, TrainingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{what} has {got} values but the reservoir matrix has {rows} rows; ensure the period and the length of the input and the target are matched")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        rows: usize,
    },
    #[error("no target defined")]
    NoTarget,
    #[error("no input defined")]
    NoInput,
    #[error("pipeline has not been run")]
    NotRun,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone)]
pub struct Pipeline {
    scan_set: ScanSet,
    matrix: ReservoirMatrix,
    target: Option<SignalSeries>,
    input: Option<SignalSeries>,
    results: Option<RcResults>,
}

impl Pipeline {
    /// Loads every `prefix*` scan in `dir` and assembles the matrix.
    pub fn new(dir: &Path, prefix: &str, params: &ProcessParams) -> Result<Self> {
        params.validate()?;
        let scan_set = load_scan_set(dir, prefix, &params.columns(), params.bg_fname.as_deref())?;
        let matrix = assemble(&scan_set, params)?;
        log::info!(
            "assembled {} x {} reservoir matrix from {}",
            matrix.n_rows(),
            matrix.n_nodes(),
            dir.display()
        );
        Ok(Self {
            scan_set,
            matrix,
            target: None,
            input: None,
            results: None,
        })
    }

    pub fn scan_set(&self) -> &ScanSet {
        &self.scan_set
    }

    pub fn matrix(&self) -> &ReservoirMatrix {
        &self.matrix
    }

    /// Rows of the reservoir matrix.
    pub fn get_df_length(&self) -> usize {
        self.matrix.n_rows()
    }

    fn check_len(&self, what: &'static str, values: &[f64]) -> Result<()> {
        let rows = self.get_df_length();
        if values.len() != rows {
            return Err(PipelineError::LengthMismatch {
                what,
                got: values.len(),
                rows,
            });
        }
        Ok(())
    }

    pub fn define_target(&mut self, target: SignalSeries) -> Result<()> {
        self.check_len("target", target.as_slice())?;
        self.target = Some(target);
        Ok(())
    }

    pub fn define_input(&mut self, input: SignalSeries) -> Result<()> {
        self.check_len("input", input.as_slice())?;
        self.input = Some(input);
        Ok(())
    }

    pub fn target(&self) -> Option<&SignalSeries> {
        self.target.as_ref()
    }

    pub fn input(&self) -> Option<&SignalSeries> {
        self.input.as_ref()
    }

    /// Trains and scores the readout. Earlier results are replaced.
    pub fn run(&mut self, params: &RcParams) -> Result<()> {
        let target = self.target.as_ref().ok_or(PipelineError::NoTarget)?;
        let y = DVector::from_column_slice(target.as_slice());
        let results = train_and_evaluate(&self.matrix.values, &y, params)?;
        log::info!(
            "train error {:.6e}, test error {:.6e}",
            results.train_error,
            results.test_error
        );
        self.results = Some(results);
        Ok(())
    }

    pub fn get_rc_results(&self) -> Result<&RcResults> {
        self.results.as_ref().ok_or(PipelineError::NotRun)
    }

    fn metrics_input(&self) -> Result<MetricsInput<'_>> {
        let input = self.input.as_ref().ok_or(PipelineError::NoInput)?;
        Ok(MetricsInput::new(input.as_slice(), &self.matrix.values)?)
    }

    pub fn get_non_linearity(&self) -> Result<NonlinearityReport> {
        Ok(nonlinearity(&self.metrics_input()?)?)
    }

    pub fn get_linear_memory_capacity(
        &self,
        kmax: usize,
        remove_auto_correlation: bool,
    ) -> Result<MemoryCapacityReport> {
        Ok(linear_memory_capacity(
            &self.metrics_input()?,
            kmax,
            remove_auto_correlation,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{write_scan_record, ColumnSpec, ScanRecord};
    use crate::training::{ErrorType, ModelSpec, RidgeParams};
    use tempfile::TempDir;

    fn write_set(dir: &Path, rows: usize, nodes: usize) {
        let cols = ColumnSpec::new("t", "Voltage", "\t");
        for t in 0..rows {
            let rec = ScanRecord {
                scan_index: t as u64 + 1,
                xs: (0..nodes).map(|j| j as f64).collect(),
                readouts: (0..nodes)
                    .map(|j| ((t * (j + 1)) as f64 * 0.37).sin())
                    .collect(),
            };
            write_scan_record(&dir.join(format!("scan{}.txt", t + 1)), &rec, &cols).unwrap();
        }
    }

    fn params() -> ProcessParams {
        ProcessParams::new("t", "Voltage", "\t")
    }

    fn rc() -> RcParams {
        RcParams {
            model: ModelSpec::Ridge(RidgeParams::with_alpha(1e-6)),
            tau: 0,
            test_size: 0.3,
            error_type: ErrorType::Mse,
        }
    }

    fn series(n: usize) -> SignalSeries {
        SignalSeries::new("s", (0..n).map(|i| (i as f64 * 0.1).cos()).collect()).unwrap()
    }

    #[test]
    fn shapes_and_lengths() {
        let tmp = TempDir::new().unwrap();
        write_set(tmp.path(), 40, 6);
        let p = Pipeline::new(tmp.path(), "scan", &params()).unwrap();
        assert_eq!(p.get_df_length(), 40);
        assert_eq!(p.matrix().n_nodes(), 6);

        let mut tp = params();
        tp.transpose = true;
        let t = Pipeline::new(tmp.path(), "scan", &tp).unwrap();
        assert_eq!(t.get_df_length(), 6);
    }

    #[test]
    fn state_machine() {
        let tmp = TempDir::new().unwrap();
        write_set(tmp.path(), 40, 6);
        let mut p = Pipeline::new(tmp.path(), "scan", &params()).unwrap();
        assert!(matches!(p.get_rc_results(), Err(PipelineError::NotRun)));
        assert!(matches!(p.run(&rc()), Err(PipelineError::NoTarget)));
        assert!(matches!(p.get_non_linearity(), Err(PipelineError::NoInput)));
        assert!(matches!(
            p.define_target(series(39)),
            Err(PipelineError::LengthMismatch { got: 39, rows: 40, .. })
        ));
        p.define_target(series(40)).unwrap();
        p.run(&RcParams { tau: 3, ..rc() }).unwrap();
        let r = p.get_rc_results().unwrap();
        assert_eq!(r.x_train.nrows() + r.x_test.nrows(), 37);
        assert_eq!(r.x_train.nrows(), 26);
    }

    #[test]
    fn rerun_is_deterministic() {
        let tmp = TempDir::new().unwrap();
        write_set(tmp.path(), 30, 4);
        let mut p = Pipeline::new(tmp.path(), "scan", &params()).unwrap();
        p.define_target(series(30)).unwrap();
        p.run(&rc()).unwrap();
        let first = p.get_rc_results().unwrap().clone();
        p.run(&rc()).unwrap();
        assert_eq!(&first, p.get_rc_results().unwrap());
    }

    #[test]
    fn empty_dir() {
        let tmp = TempDir::new().unwrap();
        assert!(matches!(
            Pipeline::new(tmp.path(), "scan", &params()),
            Err(PipelineError::Ingest(IngestError::EmptyDirectory { .. }))
        ));
    }

    #[test]
    fn invalid_params_fail_before_loading() {
        let tmp = TempDir::new().unwrap();
        let mut p = params();
        p.transpose = true;
        p.normalize_local = true;
        assert!(matches!(
            Pipeline::new(tmp.path(), "scan", &p),
            Err(PipelineError::Preprocess(PreprocessError::InvalidParams { .. }))
        ));
    }
}
