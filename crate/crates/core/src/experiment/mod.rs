//! Seeded Monte Carlo sweeps over quantizer bits and channel predictability.

mod config;
mod output;
mod sweep;

pub use config::{ChannelModel, ExperimentConfig, MethodSelection, Preset, SweepAxis};
pub use output::{
    emit_csv, render_csv, render_provenance, render_trace, sidecar_path, write_file, CSV_HEADER,
    TRACE_HEADER,
};
pub use sweep::{
    run_sweep, run_sweep_with, session_for, trial_traces, ResultRow, ResultTable, RowDiagnostics,
    SweepOptions,
};
