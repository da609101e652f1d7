//! Sequence ingestion, synthetic scenarios, one-pass evaluation and result
//! files.

mod metrics;
mod run;
mod sequence;
pub mod synth;

pub use metrics::{
    center_error, compute_ope, overlap, success_thresholds, OpeMetrics, PRECISION_THRESHOLDS,
    SUCCESS_THRESHOLDS,
};
pub use run::{
    bench, discover_sequences, draw_box, load_color_table, run_sequence, segmentation_panel,
    strip_timing, BenchEntry, BenchReport, FrameRecord, RunOptions, TrackRun, RESULTS_VERSION,
};
pub use sequence::{
    format_ground_truth, load_sequence, load_sequence_with, parse_ground_truth, LoadOptions,
    SequenceSpec, FRAME_DIR, GROUND_TRUTH_FILE,
};
pub use synth::{generate, synth_sequence, Scenario, SynthParams, SyntheticSequence};
