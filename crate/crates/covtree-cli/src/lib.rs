//! Command implementations behind the `covtree` binary, exposed as a
//! library so integration tests can drive them in-process.

pub mod commands;
pub mod manifest;
pub mod plot;

pub use commands::{
    cmd_demo, cmd_eval, cmd_fit, cmd_predict, parse_bound, parse_noise, parse_range, run_demo,
    CliError, DataSource, DemoName, DemoOutcome, DemoSpec, FitFlags, QuerySource, OUT_DIR_ENV,
};
pub use manifest::{ManifestOptions, RunManifest};
