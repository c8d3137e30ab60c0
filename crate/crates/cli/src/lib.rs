//! Experiment driver for the `rgcluster` engines: TOML configs in,
//! checksummed tables and a manifest out.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::{Path, PathBuf};

pub use commands::{run, write_run, Command, Report};
pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};

/// Loads `config`, runs `command` and writes its outputs.
///
/// The output directory is `out`, else the config's `out_dir` (relative to
/// the config file), else `out/` next to the config. A validation failure that
/// still produced a report is returned as [`CliError::Usage`] after writing.
pub fn execute(
    command: Command,
    config: &Path,
    out: Option<&Path>,
    overrides: Overrides,
    direction: Option<&Path>,
) -> CliResult<PathBuf> {
    let exp = Experiment::load(config, overrides)?;
    let out_dir = match (out, &exp.config.out_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => exp.resolve(o),
        (None, None) => exp.base_dir.join("out"),
    };
    let report = run(command, &exp, direction)?;
    write_run(&out_dir, command, &exp, &report)?;
    match report.failure {
        Some(msg) => Err(CliError::Usage(msg)),
        None => Ok(out_dir),
    }
}
