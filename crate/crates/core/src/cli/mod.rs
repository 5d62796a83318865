//! Command implementations behind the `fiinet` binary.
//!
//! Every command writes its human-readable output to a caller-supplied
//! writer and its artifacts into the configured output directory, so the
//! same functions serve the binary, the examples and the tests.

mod commands;
mod config;

pub use commands::{
    cmd_ablate, cmd_eval, cmd_export_attention, cmd_gradcheck, cmd_prepare, cmd_sweep_k, cmd_synth,
    cmd_train, gradcheck_variant, load_checked, load_data, parse_schema_spec, ComparisonRow,
    InputFormat, LoadedData, PrepareArgs, TrainSummary, ABLATION_FILE, ATTENTION_FILE,
    CHECKPOINT_FILE, LAYOUT_FILE, METRICS_FILE, SWEEP_DIMS, SWEEP_FILE,
};
pub use config::{parse_list, DataSource, RunConfig};

use crate::error::Error;

/// Process exit status for an error, one per category.
pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        "data" => 2,
        "config" => 3,
        "model" => 4,
        "numeric" => 5,
        "checkpoint" => 6,
        "io" => 7,
        _ => 1,
    }
}

/// The single-line error report printed on failure.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", e.category())
}
