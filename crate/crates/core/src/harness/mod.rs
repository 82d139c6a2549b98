//! Trace ingestion and synthesis, the persistence predictor, and the
//! privacy-utility tradeoff experiment.

mod experiment;
mod io;
mod trace;

pub use experiment::{
    aggregate, calibration_scan, default_q_grid, generate_synthetic_trace, run_tradeoff_experiment,
    run_tradeoff_on, sweep_curves, synthesize_traces, AccessLog, Aggregate, CalibrationRecord,
    CurvePoint, ExperimentConfig, ExperimentReport, Phase, PolicyKind, TraceSets,
};
pub use io::{
    load_trace, read_traces, save_traces, write_curves, write_results, write_results_to,
    write_trace_results, write_traces, ResultRow, TraceResultRow, INGEST_NORM_TOLERANCE,
};
pub use trace::{persistence_predict, SessionTrace, TraceSynthesis};
