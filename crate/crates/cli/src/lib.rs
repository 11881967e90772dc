//! Pipeline configuration and subcommands behind the `poresim` binary.

// `!(x < y)` checks are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod overrides;
pub mod pipeline;

use std::path::Path;

use poresim::{Error, Result};
use serde_json::Value;

pub use config::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STABILITY: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Process exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Stability { .. } => EXIT_STABILITY,
        Error::NonFinite { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Reads the config (empty when `path` is `None`), applies overrides and
/// resolves relative paths against the config file's directory.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Input(format!("config {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        overrides::apply_override(&mut value, o)?;
    }
    let mut cfg = PipelineConfig::from_value(value)?;
    if let Some(dir) = path.and_then(Path::parent) {
        cfg.rebase(dir);
    }
    Ok(cfg)
}
