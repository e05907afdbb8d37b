//! Physical reservoir computing toolkit.
//!
//! Turns directories of measurement files into reservoir matrices, trains
//! linear readouts on them and scores reservoirs by nonlinearity and linear
//! memory capacity. Bundled simulators produce datasets in the same file
//! format from a diode circuit, a capacitor and diode circuit, and an echo
//! state network.
//!
//! The usual entry point is [`pipeline::Pipeline`].

pub mod ingest;
pub mod metrics;
pub mod physics_sim;
pub mod pipeline;
pub mod preprocess;
pub mod targets;
pub mod training;
