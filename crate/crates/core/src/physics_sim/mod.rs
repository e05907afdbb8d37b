//! Synthetic physical reservoirs.
//!
//! Three simulators produce reservoir matrices from a scalar input:
//! a time-multiplexed diode circuit (memoryless), the same circuit with a
//! smoothing capacitor (fading memory) and a leaky echo state network. Each
//! can write its matrix as a directory of scan files readable by
//! [`crate::ingest`].
//!
//! The device parameters are stand-ins chosen for plausible magnitudes, not
//! fits to any particular component.

mod diode;
mod esn;
mod rc_circuit;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::ingest::{write_scan_record, ColumnSpec, IngestError, ScanRecord};
use crate::targets::{save_series, SignalSeries, TargetError};

pub use diode::{
    diode_voltage, map_input_to_currents, simulate_diode, DiodeCircuitParams, MultiplexWindows,
    DEFAULT_CURRENT_RANGE,
};
pub use esn::{spectral_radius, EchoStateNetwork, EsnParams};
pub use rc_circuit::{integrate_rc, junction_voltage, simulate_rc_circuit, RcCircuitParams};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator parameters: {0}")]
    InvalidParams(String),
    #[error("timestep {timestep} s exceeds RC/5 = {limit} s")]
    UnstableTimestep { timestep: f64, limit: f64 },
    #[error("could not rescale the recurrent matrix: {0}")]
    SpectralRadiusFailure(String),
    #[error("input series is empty")]
    EmptyInput,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// File prefix of simulated scans.
pub const SCAN_PREFIX: &str = "scan";
/// Name of the input series written next to the scans.
pub const INPUT_FILE: &str = "input.txt";

/// Column names of circuit datasets: window index and voltage.
pub fn circuit_columns() -> ColumnSpec {
    ColumnSpec::new("t", "Voltage", "\t")
}

/// Column names of network datasets: node index and state.
pub fn esn_columns() -> ColumnSpec {
    ColumnSpec::new("node", "State", "\t")
}

/// Writes row `t` of `matrix` to `scan{t+1}.txt` with the column index as
/// abscissa, and `input` to `input.txt`.
///
/// Existing `scan<N>.txt` files in `out_dir` are removed first so that a
/// regenerated dataset never mixes with stale scans.
pub fn write_dataset(
    out_dir: &Path,
    matrix: &DMatrix<f64>,
    input: &[f64],
    columns: &ColumnSpec,
) -> Result<(), SimError> {
    let io = |source| SimError::Io {
        path: out_dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(out_dir).map_err(io)?;
    for entry in fs::read_dir(out_dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let stale = name
            .strip_prefix(SCAN_PREFIX)
            .and_then(|rest| rest.strip_suffix(".txt"))
            .is_some_and(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()));
        if stale {
            fs::remove_file(&path).map_err(|source| SimError::Io { path, source })?;
        }
    }

    let xs: Vec<f64> = (0..matrix.ncols()).map(|j| j as f64).collect();
    for t in 0..matrix.nrows() {
        let record = ScanRecord {
            scan_index: t as u64 + 1,
            xs: xs.clone(),
            readouts: matrix.row(t).iter().copied().collect(),
        };
        let path = out_dir.join(format!("{SCAN_PREFIX}{}.txt", t + 1));
        write_scan_record(&path, &record, columns)?;
    }
    let series = SignalSeries::new("input", input.to_vec())?;
    save_series(&out_dir.join(INPUT_FILE), &series)?;
    Ok(())
}

pub fn simulate_diode_dataset(
    u: &[f64],
    w: &MultiplexWindows,
    p: &DiodeCircuitParams,
    out_dir: &Path,
) -> Result<DMatrix<f64>, SimError> {
    let m = simulate_diode(u, w, p)?;
    write_dataset(out_dir, &m, u, &circuit_columns())?;
    Ok(m)
}

pub fn simulate_rc_circuit_dataset(
    u: &[f64],
    w: &MultiplexWindows,
    p: &RcCircuitParams,
    out_dir: &Path,
) -> Result<DMatrix<f64>, SimError> {
    let m = simulate_rc_circuit(u, w, p)?;
    write_dataset(out_dir, &m, u, &circuit_columns())?;
    Ok(m)
}

pub fn simulate_esn_dataset(u: &[f64], p: &EsnParams, out_dir: &Path) -> Result<DMatrix<f64>, SimError> {
    let m = EchoStateNetwork::new(p)?.run(u)?;
    write_dataset(out_dir, &m, u, &esn_columns())?;
    Ok(m)
}
